#include "specjac/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "specjac/trajectory.hpp"

namespace specjac {

using nlohmann::json;

namespace {

const std::vector<std::string> kKnownDecoders = {"ar", "jacobi", "sjd", "sjd-vp"};

bool known_decoder(const std::string& d) {
  return std::find(kKnownDecoders.begin(), kKnownDecoders.end(), d) != kKnownDecoders.end();
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double_str(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("bad numeric value '" + s + "'");
  }
  return v;
}

long parse_long_str(const std::string& s) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("bad integer value '" + s + "'");
  }
  return v;
}

uint64_t parse_u64_str(const std::string& s) {
  uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("bad unsigned value '" + s + "'");
  }
  return v;
}

bool parse_bool_str(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("bad boolean value '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    size_t a = item.find_first_not_of(" \t");
    size_t b = item.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

std::vector<uint64_t> parse_seed_list(const std::string& s) {
  std::vector<uint64_t> out;
  auto dash = s.find('-');
  if (dash != std::string::npos && dash > 0) {
    uint64_t lo = parse_u64_str(s.substr(0, dash));
    uint64_t hi = parse_u64_str(s.substr(dash + 1));
    if (hi < lo) throw ConfigError("seed range must be ascending");
    for (uint64_t v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  for (const auto& item : split_list(s)) out.push_back(parse_u64_str(item));
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void ExperimentConfig::validate(bool relaxed) const {
  if (vocab < 2) throw ConfigError("model.vocab must be >= 2");
  if (order < 1) throw ConfigError("model.order must be >= 1");
  if (!(concentration > 0.0)) throw ConfigError("model.concentration must be positive");
  if (attractor_weight < 0.0 || attractor_weight > 1.0) {
    throw ConfigError("model.attractor_weight must lie in [0, 1]");
  }
  if (prompt_count < 1) throw ConfigError("prompts.count must be >= 1");
  if (prefix_len < 0) throw ConfigError("prompts.prefix_len must be >= 0");
  if (target_len <= prefix_len) throw ConfigError("prompts.target_len must exceed the prefix");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (max_iter_factor < 0) throw ConfigError("max_iter_factor must be >= 0");
  if (!known_decoder(decoder)) throw ConfigError("unknown decoder '" + decoder + "'");
  if (decoders.empty()) throw ConfigError("decoders list must not be empty");
  for (const auto& d : decoders) {
    if (!known_decoder(d)) throw ConfigError("unknown decoder '" + d + "'");
  }
  if (seeds.empty()) throw ConfigError("seeds list must not be empty");
  vp.validate(relaxed);
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["model.seed"] = std::to_string(model_seed);
  kv["model.order"] = std::to_string(order);
  kv["model.vocab"] = std::to_string(vocab);
  kv["model.concentration"] = format_double(concentration);
  kv["model.attractor_weight"] = format_double(attractor_weight);
  kv["model.file"] = model_file;
  kv["prompts.seed"] = std::to_string(prompts_seed);
  kv["prompts.count"] = std::to_string(prompt_count);
  kv["prompts.prefix_len"] = std::to_string(prefix_len);
  kv["prompts.target_len"] = std::to_string(target_len);
  kv["decoder"] = decoder;
  std::string ds;
  for (const auto& d : decoders) {
    if (!ds.empty()) ds += ',';
    ds += d;
  }
  kv["decoders"] = ds;
  kv["window"] = std::to_string(window);
  kv["max_iter_factor"] = std::to_string(max_iter_factor);
  kv["vp.gamma"] = format_double(vp.gamma);
  kv["vp.history_len"] = std::to_string(vp.history_len);
  kv["vp.growth_steps"] = std::to_string(vp.growth_steps);
  kv["vp.topk_ratio"] = format_double(vp.topk_ratio);
  kv["vp.eps"] = format_double(vp.eps);
  kv["vp.verify_mode"] = to_string(vp.verify_mode);
  kv["vp.ewa_includes_current"] = vp.ewa_includes_current ? "true" : "false";
  kv["vp.growth_inclusive"] = vp.growth_inclusive ? "true" : "false";
  kv["vp.score_clamp"] = format_double(vp.score_clamp);
  std::string ss;
  for (uint64_t s : seeds) {
    if (!ss.empty()) ss += ',';
    ss += std::to_string(s);
  }
  kv["seeds"] = ss;

  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::string ExperimentConfig::fingerprint() const {
  // FNV-1a 64-bit over the canonical rendering.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

MarkovModel ExperimentConfig::build_model() const {
  if (!model_file.empty()) return MarkovModel::load(model_file);
  return MarkovModel::build(model_seed, order, vocab, concentration, attractor_weight);
}

std::vector<Prompt> ExperimentConfig::build_prompts() const {
  return make_prompts(prompts_seed, prompt_count, prefix_len, target_len, vocab);
}

EngineConfig ExperimentConfig::engine_config() const {
  EngineConfig ec;
  ec.verify_mode = vp.verify_mode;
  ec.max_iter_factor = max_iter_factor;
  ec.accept_eps = vp.eps;
  // Sweeps may push the growth requirement beyond the EWA depth; keep enough
  // snapshots for the mask either way.
  ec.history_len =
      std::max(vp.history_len, vp.growth_steps + (vp.growth_inclusive ? 1 : 0));
  return ec;
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "model.seed") cfg.model_seed = parse_u64_str(value);
  else if (key == "model.order") cfg.order = static_cast<int>(parse_long_str(value));
  else if (key == "model.vocab") cfg.vocab = static_cast<int>(parse_long_str(value));
  else if (key == "model.concentration") cfg.concentration = parse_double_str(value);
  else if (key == "model.attractor_weight") cfg.attractor_weight = parse_double_str(value);
  else if (key == "model.file") cfg.model_file = value;
  else if (key == "prompts.seed") cfg.prompts_seed = parse_u64_str(value);
  else if (key == "prompts.count") cfg.prompt_count = static_cast<int>(parse_long_str(value));
  else if (key == "prompts.prefix_len") cfg.prefix_len = static_cast<int>(parse_long_str(value));
  else if (key == "prompts.target_len") cfg.target_len = static_cast<int>(parse_long_str(value));
  else if (key == "decoder") cfg.decoder = value;
  else if (key == "decoders") cfg.decoders = split_list(value);
  else if (key == "window") cfg.window = static_cast<int>(parse_long_str(value));
  else if (key == "max_iter_factor") cfg.max_iter_factor = parse_long_str(value);
  else if (key == "vp.gamma") cfg.vp.gamma = parse_double_str(value);
  else if (key == "vp.history_len") cfg.vp.history_len = static_cast<int>(parse_long_str(value));
  else if (key == "vp.growth_steps") cfg.vp.growth_steps = static_cast<int>(parse_long_str(value));
  else if (key == "vp.topk_ratio") cfg.vp.topk_ratio = parse_double_str(value);
  else if (key == "vp.eps") cfg.vp.eps = parse_double_str(value);
  else if (key == "vp.verify_mode") cfg.vp.verify_mode = verify_mode_from_string(value);
  else if (key == "vp.ewa_includes_current") cfg.vp.ewa_includes_current = parse_bool_str(value);
  else if (key == "vp.growth_inclusive") cfg.vp.growth_inclusive = parse_bool_str(value);
  else if (key == "vp.score_clamp") cfg.vp.score_clamp = parse_double_str(value);
  else if (key == "seeds") cfg.seeds = parse_seed_list(value);
  else if (key == "out") cfg.out_dir = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  ExperimentConfig cfg;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

namespace {

std::unique_ptr<Drafter> make_drafter(const ExperimentConfig& cfg, const std::string& name,
                                      bool relaxed) {
  if (name == "sjd") return std::make_unique<SjdDrafter>();
  if (name == "sjd-vp") return std::make_unique<VpDrafter>(cfg.vp, relaxed);
  throw ConfigError("decoder '" + name + "' has no drafter");
}

struct RunTally {
  long runs = 0;
  long nfe = 0;
  long drafted = 0;
  long accepted = 0;
  long run_length_sum = 0;
  long run_length_count = 0;
  long generated = 0;
  long corrections = 0;

  void add(const RunStats& s) {
    ++runs;
    nfe += s.nfe;
    drafted += s.drafted;
    accepted += s.accepted;
    for (int r : s.run_lengths) run_length_sum += r;
    run_length_count += static_cast<long>(s.run_lengths.size());
    generated += s.generated;
    corrections += s.corrections;
  }

  double mean_nfe() const { return runs ? static_cast<double>(nfe) / runs : 0.0; }
  double acceptance() const {
    return drafted ? static_cast<double>(accepted) / static_cast<double>(drafted) : 0.0;
  }
  double mean_run_length() const {
    return run_length_count ? static_cast<double>(run_length_sum) /
                                  static_cast<double>(run_length_count)
                            : 0.0;
  }
};

}  // namespace

SpecResult run_single(const ExperimentConfig& cfg, const MarkovModel& model, const Prompt& prompt,
                      uint64_t seed, TrajectoryLogger* log, int run_id, bool relaxed) {
  SeededRng rng(SeededRng::derive(seed, static_cast<uint64_t>(prompt.id)));
  if (cfg.decoder == "ar") {
    ArResult ar = autoregressive_decode(model, prompt, rng);
    SpecResult res;
    res.tokens = std::move(ar.tokens);
    res.stats.nfe = ar.nfe;
    res.stats.generated = ar.nfe;
    res.stats.iterations = ar.nfe;
    return res;
  }
  if (cfg.decoder == "jacobi") {
    GreedyJacobiResult gj = run_greedy_jacobi(model, prompt, cfg.window);
    SpecResult res;
    res.tokens = std::move(gj.tokens);
    res.stats = gj.stats;
    return res;
  }
  auto drafter = make_drafter(cfg, cfg.decoder, relaxed);
  return run_speculative_jacobi(model, prompt, cfg.window, *drafter, rng, cfg.engine_config(),
                                log, run_id);
}

ComparisonReport run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& jsonl_dir,
                                bool relaxed) {
  cfg.validate(relaxed);
  MarkovModel model = cfg.build_model();
  std::vector<Prompt> prompts = cfg.build_prompts();

  ComparisonReport report;
  report.fingerprint = cfg.fingerprint();

  std::vector<uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());

  double ar_mean_nfe = 0.0;
  for (const auto& name : cfg.decoders) {
    RunTally total;
    std::unique_ptr<std::ofstream> jsonl_out;
    std::unique_ptr<TrajectoryLogger> logger;
    if (jsonl_dir && (name == "sjd" || name == "sjd-vp")) {
      std::filesystem::create_directories(*jsonl_dir);
      jsonl_out = std::make_unique<std::ofstream>(*jsonl_dir / ("traj_" + name + ".jsonl"));
      TrajectoryMeta meta;
      meta.fingerprint = report.fingerprint;
      meta.decoder = name;
      meta.vocab = cfg.vocab;
      meta.window = cfg.window;
      meta.gamma = cfg.vp.gamma;
      meta.history_len = cfg.vp.history_len;
      meta.growth_steps = cfg.vp.growth_steps;
      meta.growth_inclusive = cfg.vp.growth_inclusive;
      meta.verify_mode = to_string(cfg.vp.verify_mode);
      logger = std::make_unique<TrajectoryLogger>(*jsonl_out, meta);
    }

    int run_id = 0;
    for (uint64_t seed : seeds) {
      RunTally per_seed;
      for (const auto& prompt : prompts) {
        ExperimentConfig one = cfg;
        one.decoder = name;
        SpecResult res = run_single(one, model, prompt, seed, logger.get(), run_id++, relaxed);
        per_seed.add(res.stats);
      }
      total.runs += per_seed.runs;
      total.nfe += per_seed.nfe;
      total.drafted += per_seed.drafted;
      total.accepted += per_seed.accepted;
      total.run_length_sum += per_seed.run_length_sum;
      total.run_length_count += per_seed.run_length_count;
      total.generated += per_seed.generated;
      total.corrections += per_seed.corrections;

      SeedRow row;
      row.decoder = name;
      row.seed = seed;
      row.mean_nfe = per_seed.mean_nfe();
      row.acceptance_rate = per_seed.acceptance();
      row.mean_run_length = per_seed.mean_run_length();
      row.generated = per_seed.generated;
      row.corrections = per_seed.corrections;
      report.rows.push_back(std::move(row));
    }

    DecoderAggregate agg;
    agg.decoder = name;
    agg.mean_nfe = total.mean_nfe();
    agg.acceptance_rate = total.acceptance();
    agg.mean_run_length = total.mean_run_length();
    agg.generated = total.generated;
    if (name == "ar") ar_mean_nfe = agg.mean_nfe;
    report.aggregates.push_back(std::move(agg));
  }

  // Acceleration relative to plain autoregressive decoding; without an ar
  // row the exact per-token count serves as the baseline.
  double baseline = ar_mean_nfe > 0.0
                        ? ar_mean_nfe
                        : static_cast<double>(cfg.target_len - cfg.prefix_len);
  for (auto& agg : report.aggregates) {
    agg.nfe_accel_vs_ar = agg.mean_nfe > 0.0 ? baseline / agg.mean_nfe : 0.0;
  }
  return report;
}

std::string format_report_table(const ComparisonReport& report) {
  std::ostringstream out;
  out << "decoder      mean NFE     NFE accel   accept rate   mean run len\n";
  for (const auto& a : report.aggregates) {
    char line[160];
    snprintf(line, sizeof(line), "%-12s %-12.2f %-11.2f %-13.4f %-12.3f\n", a.decoder.c_str(),
             a.mean_nfe, a.nfe_accel_vs_ar, a.acceptance_rate, a.mean_run_length);
    out << line;
  }
  out << "config fingerprint: " << report.fingerprint << '\n';
  return out.str();
}

void write_report_files(const ExperimentConfig& cfg, const ComparisonReport& report,
                        const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  json j;
  j["schema"] = "specjac-report-v1";
  j["fingerprint"] = report.fingerprint;
  j["config"] = cfg.canonical();
  j["aggregates"] = json::array();
  for (const auto& a : report.aggregates) {
    j["aggregates"].push_back({{"decoder", a.decoder},
                               {"mean_nfe", a.mean_nfe},
                               {"nfe_accel_vs_ar", a.nfe_accel_vs_ar},
                               {"acceptance_rate", a.acceptance_rate},
                               {"mean_run_length", a.mean_run_length},
                               {"generated", a.generated}});
  }
  j["per_seed"] = json::array();
  for (const auto& r : report.rows) {
    j["per_seed"].push_back({{"decoder", r.decoder},
                             {"seed", r.seed},
                             {"mean_nfe", r.mean_nfe},
                             {"acceptance_rate", r.acceptance_rate},
                             {"mean_run_length", r.mean_run_length},
                             {"generated", r.generated},
                             {"corrections", r.corrections}});
  }
  std::ofstream jf(out_dir / "report.json");
  if (!jf) throw std::runtime_error("cannot write report.json");
  jf << j.dump(2) << '\n';

  std::ofstream cf(out_dir / "report.csv");
  if (!cf) throw std::runtime_error("cannot write report.csv");
  cf << "decoder,seed,mean_nfe,acceptance_rate,mean_run_length,generated,corrections,"
        "fingerprint\n";
  for (const auto& r : report.rows) {
    cf << r.decoder << ',' << r.seed << ',' << format_double(r.mean_nfe) << ','
       << format_double(r.acceptance_rate) << ',' << format_double(r.mean_run_length) << ','
       << r.generated << ',' << r.corrections << ',' << report.fingerprint << '\n';
  }
}

std::vector<SweepRow> ablation_sweep(const ExperimentConfig& cfg, const std::string& knob,
                                     const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("ablation sweep: empty value list");
  std::vector<SweepRow> rows;
  for (double v : values) {
    ExperimentConfig c = cfg;
    if (knob == "gamma") c.vp.gamma = v;
    else if (knob == "L") c.vp.history_len = static_cast<int>(std::llround(v));
    else if (knob == "N") c.vp.growth_steps = static_cast<int>(std::llround(v));
    else if (knob == "topk_ratio") c.vp.topk_ratio = v;
    else if (knob == "W") c.window = static_cast<int>(std::llround(v));
    else throw ConfigError("unknown sweep knob '" + knob + "' (gamma|L|N|topk_ratio|W)");

    ComparisonReport rep = run_experiment(c, std::nullopt, /*relaxed=*/true);
    for (const auto& agg : rep.aggregates) {
      SweepRow row;
      row.knob = knob;
      row.value = v;
      row.aggregate = agg;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows,
                     const std::string& fingerprint) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "knob,value,decoder,mean_nfe,nfe_accel_vs_ar,acceptance_rate,mean_run_length,"
         "fingerprint\n";
  for (const auto& r : rows) {
    out << r.knob << ',' << format_double(r.value) << ',' << r.aggregate.decoder << ','
        << format_double(r.aggregate.mean_nfe) << ','
        << format_double(r.aggregate.nfe_accel_vs_ar) << ','
        << format_double(r.aggregate.acceptance_rate) << ','
        << format_double(r.aggregate.mean_run_length) << ',' << fingerprint << '\n';
  }
}

OverheadReport overhead_probe(const ExperimentConfig& cfg, int batches, int slots_per_batch) {
  cfg.validate();
  MarkovModel model = cfg.build_model();
  HistoryStore history(cfg.engine_config().history_len + 2);
  SeededRng setup(SeededRng::derive(cfg.model_seed, 0xBE9C4ULL));

  // Slot batch with prefilled histories so the growth/fusion path does real
  // work: trails drift upward for a sprinkling of tokens.
  std::vector<DraftSlot> slots(static_cast<size_t>(slots_per_batch));
  for (int s = 0; s < slots_per_batch; ++s) {
    size_t row = setup.next_below(model.row_count());
    auto& slot = slots[static_cast<size_t>(s)];
    slot.p = model.row(row);
    slot.position = s;
    slot.from_model = true;
    int depth = cfg.vp.history_len + 1;
    for (int k = depth; k >= 1; --k) {
      std::vector<double> older(slot.p.values().begin(), slot.p.values().end());
      for (double& x : older) {
        x = std::max(1e-9, x * (0.75 + 0.05 * static_cast<double>(k)));
      }
      history.push(slot.position, Distribution::from_unnormalized(std::move(older)));
    }
  }

  auto time_drafter = [&](Drafter& drafter) {
    SeededRng rng(12345);
    // Warmup batch, then timed batches.
    (void)drafter.draft(slots, history, rng, nullptr, 1);
    std::vector<double> per_batch;
    for (int b = 0; b < batches; ++b) {
      auto t0 = std::chrono::steady_clock::now();
      (void)drafter.draft(slots, history, rng, nullptr, b + 2);
      auto t1 = std::chrono::steady_clock::now();
      per_batch.push_back(
          std::chrono::duration<double, std::nano>(t1 - t0).count() / slots_per_batch);
    }
    std::sort(per_batch.begin(), per_batch.end());
    return per_batch[per_batch.size() / 2];  // median
  };

  SjdDrafter sjd;
  VpDrafter vp(cfg.vp);
  OverheadReport rep;
  rep.sjd_ns_per_slot = time_drafter(sjd);
  rep.vp_ns_per_slot = time_drafter(vp);
  rep.ratio = rep.sjd_ns_per_slot > 0.0 ? rep.vp_ns_per_slot / rep.sjd_ns_per_slot : 0.0;
  rep.slots_timed = static_cast<long>(batches) * slots_per_batch;
  return rep;
}

void write_timing_json(const std::filesystem::path& path, const OverheadReport& probe,
                       double wall_seconds, const std::string& fingerprint) {
  json j;
  j["schema"] = "specjac-timing-v1";
  j["fingerprint"] = fingerprint;
  j["wall_seconds"] = wall_seconds;
  j["overhead"] = {{"sjd_ns_per_slot", probe.sjd_ns_per_slot},
                   {"vp_ns_per_slot", probe.vp_ns_per_slot},
                   {"ratio", probe.ratio},
                   {"slots_timed", probe.slots_timed}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace specjac
