#include "specjac/analysis.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "specjac/drafter.hpp"
#include "specjac/trajectory.hpp"

namespace specjac {

using nlohmann::json;

namespace {

LogMeta parse_meta(const json& j) {
  LogMeta meta;
  meta.schema = j.at("schema").get<std::string>();
  if (meta.schema != TrajectoryLogger::kSchema) {
    throw AnalysisError("unsupported trajectory schema '" + meta.schema + "'");
  }
  meta.fingerprint = j.at("fingerprint").get<std::string>();
  meta.decoder = j.at("decoder").get<std::string>();
  meta.vocab = j.at("vocab").get<int>();
  meta.window = j.at("window").get<int>();
  meta.gamma = j.at("gamma").get<double>();
  meta.history_len = j.at("history_len").get<int>();
  meta.growth_steps = j.at("growth_steps").get<int>();
  meta.growth_inclusive = j.at("growth_inclusive").get<bool>();
  meta.verify_mode = j.at("verify_mode").get<std::string>();
  return meta;
}

void merge_series(TrajectoryLog& log, int run, long pos, int token, long iter,
                  const std::vector<double>& trail) {
  auto& series = log.series[{run, pos, token}];
  long len = static_cast<long>(trail.size());
  for (long j = 0; j < len; ++j) {
    long it = iter - (len - 1 - j);
    auto [where, inserted] = series.emplace(it, trail[static_cast<size_t>(j)]);
    if (!inserted && where->second != trail[static_cast<size_t>(j)]) {
      throw AnalysisError("inconsistent trail values for one (run, pos, token, iter)");
    }
  }
}

}  // namespace

TrajectoryLog load_trajectory_log(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw AnalysisError("no trajectory files given");
  TrajectoryLog log;
  bool have_meta = false;

  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw AnalysisError("cannot open trajectory file " + path.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw AnalysisError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      const std::string type = j.at("type").get<std::string>();
      if (type == "meta") {
        LogMeta meta = parse_meta(j);
        if (!have_meta) {
          log.meta = meta;
          have_meta = true;
        } else if (meta.fingerprint != log.meta.fingerprint) {
          throw AnalysisError("mixed config fingerprints across trajectory inputs (" +
                              log.meta.fingerprint + " vs " + meta.fingerprint + ")");
        }
      } else if (type == "run") {
        // run boundary marker; records carry their run id themselves
      } else if (type == "ver") {
        TrajectoryRecord r;
        r.run = j.at("run").get<int>();
        r.iter = j.at("iter").get<long>();
        r.pos = j.at("pos").get<long>();
        r.token = j.at("token").get<int>();
        r.prob = j.at("prob").get<double>();
        r.accepted = j.at("accepted").get<bool>();
        r.masked = j.at("masked").get<bool>();
        r.in_candidates = j.at("cand").get<bool>();
        r.status = j.at("status").get<std::string>();
        r.trail = j.at("trail").get<std::vector<double>>();
        if (j.contains("correction")) r.correction = j.at("correction").get<int>();
        if (j.contains("corr_prob")) r.corr_prob = j.at("corr_prob").get<double>();
        log.records.push_back(std::move(r));
      } else if (type == "draft") {
        DraftRecord d;
        d.run = j.at("run").get<int>();
        d.iter = j.at("iter").get<long>();
        d.pos = j.at("pos").get<long>();
        d.token = j.at("token").get<int>();
        d.role = j.at("role").get<std::string>();
        d.pbar = j.at("pbar").get<double>();
        d.score = j.at("score").get<double>();
        d.mask = j.at("mask").get<int>();
        d.in_candidates = j.at("in_candidates").get<bool>();
        d.p_before = j.at("p_before").get<double>();
        d.p_after = j.at("p_after").get<double>();
        d.trail = j.at("trail").get<std::vector<double>>();
        log.drafts.push_back(std::move(d));
      } else {
        throw AnalysisError("unknown record type '" + type + "' in " + path.string());
      }
    }
  }
  if (!have_meta) throw AnalysisError("trajectory input carries no meta record");

  for (const auto& r : log.records) {
    if (r.status == "accepted") {
      log.final_tokens[{r.run, r.pos}] = r.token;
    } else if (r.status == "rejected" && r.correction) {
      log.final_tokens[{r.run, r.pos}] = *r.correction;
    }
    merge_series(log, r.run, r.pos, r.token, r.iter, r.trail);
  }
  for (const auto& d : log.drafts) {
    merge_series(log, d.run, d.pos, d.token, d.iter, d.trail);
  }
  return log;
}

GrowthFractionResult accepted_growth_fraction(const TrajectoryLog& log, int n_steps) {
  if (n_steps < 1) throw AnalysisError("accepted_growth_fraction: n_steps must be >= 1");
  GrowthFractionResult res;
  for (const auto& r : log.records) {
    if (!r.accepted) continue;
    ++res.accepted_total;
    if (static_cast<int>(r.trail.size()) < n_steps + 1) {
      ++res.excluded;
      continue;
    }
    ++res.eligible;
    bool growing = true;
    size_t last = r.trail.size() - 1;
    for (int k = 0; k < n_steps; ++k) {
      if (!(r.trail[last - static_cast<size_t>(k)] > r.trail[last - static_cast<size_t>(k) - 1])) {
        growing = false;
        break;
      }
    }
    if (growing) ++res.growing;
  }
  if (res.eligible > 0) {
    res.fraction = static_cast<double>(res.growing) / static_cast<double>(res.eligible);
  }
  return res;
}

namespace {

// Streak test on a per-iteration series: n strict increases ending at iter.
bool has_streak(const std::map<long, double>& series, long iter, int n) {
  auto it = series.find(iter);
  if (it == series.end()) return false;
  for (int k = 0; k < n; ++k) {
    auto prev = series.find(iter - k - 1);
    auto cur = series.find(iter - k);
    if (prev == series.end() || cur == series.end()) return false;
    if (!(cur->second > prev->second)) return false;
  }
  return true;
}

}  // namespace

ContinuationResult continuation_probability(const TrajectoryLog& log, int n) {
  if (n < 1) throw AnalysisError("continuation_probability: n must be >= 1");
  ContinuationResult res;
  res.n = n;
  for (const auto& [key, series] : log.series) {
    const auto [run, pos, token] = key;
    auto final_it = log.final_tokens.find({run, pos});
    bool is_final = final_it != log.final_tokens.end() && final_it->second == token;
    for (const auto& [iter, value] : series) {
      if (!has_streak(series, iter, n)) continue;
      auto next = series.find(iter + 1);
      if (next == series.end()) continue;  // no observation at the next step
      bool continued = next->second > value;
      if (is_final) {
        ++res.correct_events;
        if (continued) ++res.correct_continued;
      } else {
        ++res.incorrect_events;
        if (continued) ++res.incorrect_continued;
      }
    }
  }
  if (res.correct_events > 0) {
    res.correct = static_cast<double>(res.correct_continued) /
                  static_cast<double>(res.correct_events);
  }
  if (res.incorrect_events > 0) {
    res.incorrect = static_cast<double>(res.incorrect_continued) /
                    static_cast<double>(res.incorrect_events);
  }
  return res;
}

PrecisionResult selection_precision(const TrajectoryLog& log, int n) {
  if (n < 1) throw AnalysisError("selection_precision: n must be >= 1");
  PrecisionResult res;
  res.n = n;
  for (const auto& [key, series] : log.series) {
    const auto [run, pos, token] = key;
    auto final_it = log.final_tokens.find({run, pos});
    for (const auto& [iter, value] : series) {
      (void)value;
      if (!has_streak(series, iter, n)) continue;
      ++res.events;
      if (final_it != log.final_tokens.end() && final_it->second == token) ++res.correct;
    }
  }
  if (res.events > 0) {
    res.precision = static_cast<double>(res.correct) / static_cast<double>(res.events);
  }
  return res;
}

MaskCheckResult recheck_masks(const TrajectoryLog& log) {
  MaskCheckResult res;
  const bool vp = log.meta.decoder == "sjd-vp";
  const int need =
      log.meta.growth_inclusive ? log.meta.growth_steps + 1 : log.meta.growth_steps;
  for (const auto& r : log.records) {
    ++res.records;
    bool expect = false;
    if (vp) {
      std::span<const double> draft_trail(r.trail.data(), r.trail.size() - 1);
      expect = r.in_candidates && growth_mask(draft_trail, need) == 1;
    }
    if (expect != r.masked) ++res.mismatches;
  }
  return res;
}

AnalysisSummary analyze(const TrajectoryLog& log, int n_steps, const std::vector<int>& ns) {
  AnalysisSummary s;
  s.meta = log.meta;
  s.n_steps = n_steps;
  s.growth = accepted_growth_fraction(log, n_steps);
  for (int n : ns) {
    s.continuation.push_back(continuation_probability(log, n));
    s.precision.push_back(selection_precision(log, n));
  }
  s.mask_check = recheck_masks(log);
  return s;
}

namespace {

json result_or_null(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

void write_summary_json(const std::filesystem::path& path, const AnalysisSummary& s) {
  json j;
  j["schema"] = "specjac-analysis-v1";
  j["fingerprint"] = s.meta.fingerprint;
  j["decoder"] = s.meta.decoder;
  j["n_steps"] = s.n_steps;
  j["growth"] = {{"fraction", result_or_null(s.growth.fraction)},
                 {"accepted_total", s.growth.accepted_total},
                 {"eligible", s.growth.eligible},
                 {"growing", s.growth.growing},
                 {"excluded", s.growth.excluded}};
  j["continuation"] = json::array();
  for (const auto& c : s.continuation) {
    j["continuation"].push_back({{"n", c.n},
                                 {"correct", result_or_null(c.correct)},
                                 {"incorrect", result_or_null(c.incorrect)},
                                 {"correct_events", c.correct_events},
                                 {"correct_continued", c.correct_continued},
                                 {"incorrect_events", c.incorrect_events},
                                 {"incorrect_continued", c.incorrect_continued}});
  }
  j["precision"] = json::array();
  for (const auto& p : s.precision) {
    j["precision"].push_back({{"n", p.n},
                              {"precision", result_or_null(p.precision)},
                              {"events", p.events},
                              {"correct", p.correct}});
  }
  j["mask_check"] = {{"records", s.mask_check.records}, {"mismatches", s.mask_check.mismatches}};
  j["reference"] = {{"growth_fraction_avg", kReferenceGrowthFractionAvg},
                    {"selection_precision_n2", kReferenceSelectionPrecisionN2},
                    {"selection_precision_n3", kReferenceSelectionPrecisionN3},
                    {"note", "large-model reference values, qualitative comparison only"}};

  std::ofstream out(path);
  if (!out) throw AnalysisError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_summary_csv(const std::filesystem::path& path, const AnalysisSummary& s) {
  std::ofstream out(path);
  if (!out) throw AnalysisError("cannot write " + path.string());
  out << "stat,n,value,events,hits\n";
  auto line = [&](const std::string& stat, int n, const std::optional<double>& v, long events,
                  long hits) {
    out << stat << ',' << n << ',';
    if (v) out << *v;
    out << ',' << events << ',' << hits << '\n';
  };
  line("growth_fraction", s.n_steps, s.growth.fraction, s.growth.eligible, s.growth.growing);
  for (const auto& c : s.continuation) {
    line("continuation_correct", c.n, c.correct, c.correct_events, c.correct_continued);
    line("continuation_incorrect", c.n, c.incorrect, c.incorrect_events, c.incorrect_continued);
  }
  for (const auto& p : s.precision) {
    line("selection_precision", p.n, p.precision, p.events, p.correct);
  }
}

}  // namespace specjac
