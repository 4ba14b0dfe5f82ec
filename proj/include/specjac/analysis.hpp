#pragma once

// Trajectory-log statistics: how often verification-accepted tokens rode a
// streak of strictly increasing probabilities, how persistent such streaks
// are, and how precisely a streak points at the token a position finally
// commits. Every statistic is a pure function of the JSON Lines log.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace specjac {

struct AnalysisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LogMeta {
  std::string schema;
  std::string fingerprint;
  std::string decoder;
  int vocab = 0;
  int window = 0;
  double gamma = 0.8;
  int history_len = 3;
  int growth_steps = 3;
  bool growth_inclusive = false;
  std::string verify_mode = "strict";
};

struct TrajectoryRecord {
  int run = 0;
  long iter = 0;
  long pos = 0;
  int token = 0;
  double prob = 0.0;
  bool accepted = false;
  bool masked = false;
  bool in_candidates = false;
  std::string status;
  std::optional<int> correction;
  std::optional<double> corr_prob;
  std::vector<double> trail;  // oldest first, current last (== prob)
  bool was_final_token = false;  // derived after load
};

struct DraftRecord {
  int run = 0;
  long iter = 0;
  long pos = 0;
  int token = 0;
  std::string role;
  double pbar = 0.0;
  double score = 0.0;
  int mask = 0;
  bool in_candidates = false;
  double p_before = 0.0;
  double p_after = 0.0;
  std::vector<double> trail;
};

struct TrajectoryLog {
  LogMeta meta;
  std::vector<TrajectoryRecord> records;
  std::vector<DraftRecord> drafts;
  // (run, pos) -> committed token (accepted draft or correction).
  std::map<std::pair<int, long>, int> final_tokens;
  // (run, pos, token) -> iteration -> probability, merged from all trails.
  std::map<std::tuple<int, long, int>, std::map<long, double>> series;
};

/// Parses one or more JSONL files. Mixed config fingerprints are refused.
TrajectoryLog load_trajectory_log(const std::vector<std::filesystem::path>& paths);

struct GrowthFractionResult {
  std::optional<double> fraction;  // empty when no accepted token has enough history
  long accepted_total = 0;
  long eligible = 0;
  long growing = 0;
  long excluded = 0;  // insufficient history; eligible + excluded == accepted_total
};

/// Fraction of verification-accepted tokens whose probability strictly
/// increased over their final n_steps comparisons before acceptance.
GrowthFractionResult accepted_growth_fraction(const TrajectoryLog& log, int n_steps);

struct ContinuationResult {
  int n = 0;
  std::optional<double> correct;    // P(next step also increases | token is final)
  std::optional<double> incorrect;  // same for non-final tokens
  long correct_events = 0;
  long correct_continued = 0;
  long incorrect_events = 0;
  long incorrect_continued = 0;
};

ContinuationResult continuation_probability(const TrajectoryLog& log, int n);

struct PrecisionResult {
  int n = 0;
  std::optional<double> precision;
  long events = 0;
  long correct = 0;
};

/// Among (position, iteration, token) events showing n consecutive strict
/// increases, the fraction where the token is the finally committed one.
PrecisionResult selection_precision(const TrajectoryLog& log, int n);

struct MaskCheckResult {
  long records = 0;
  long mismatches = 0;
};

/// Recomputes each record's growth mask from its draft-time trail and the
/// logged candidate flag and compares against the drafter's masked flag.
MaskCheckResult recheck_masks(const TrajectoryLog& log);

struct AnalysisSummary {
  LogMeta meta;
  int n_steps = 0;
  GrowthFractionResult growth;
  std::vector<ContinuationResult> continuation;
  std::vector<PrecisionResult> precision;
  MaskCheckResult mask_check;
};

/// Full pipeline at growth window n_steps, continuation/precision at each n
/// in ns.
AnalysisSummary analyze(const TrajectoryLog& log, int n_steps, const std::vector<int>& ns);

void write_summary_json(const std::filesystem::path& path, const AnalysisSummary& summary);
void write_summary_csv(const std::filesystem::path& path, const AnalysisSummary& summary);

// Reference values measured on large neural models, reported in summaries
// for qualitative comparison only — never asserted against toy runs.
inline constexpr double kReferenceGrowthFractionAvg = 0.914;
inline constexpr double kReferenceSelectionPrecisionN2 = 0.7276;
inline constexpr double kReferenceSelectionPrecisionN3 = 0.9635;

}  // namespace specjac
