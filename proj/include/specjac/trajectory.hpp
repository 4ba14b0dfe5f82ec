#pragma once

// JSON Lines trajectory log. One "ver" record per (iteration, window
// position) during verification, optional "draft" records from the drafter,
// one "meta" header record per file and one "run" record per decode.
//
// Schema (specjac-trajectory-v1), one JSON object per line:
//   meta : {type, schema, fingerprint, decoder, vocab, window, gamma,
//           history_len, growth_steps, growth_inclusive, verify_mode}
//   run  : {type, run, seed}
//   ver  : {type, run, iter, pos, token, prob, accepted, status, masked,
//           cand, trail, [correction, corr_prob]}
//   draft: {type, run, iter, pos, token, role, pbar, score, mask,
//           in_candidates, p_before, p_after, trail}
//
// "trail" is the token's probability at this position across the retained
// snapshots plus the current value (oldest first, current last); it is what
// makes growth statistics and mask recomputation exact from the log alone.
// Keys serialize alphabetically; identical runs produce identical bytes.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace specjac {

struct TrajectoryMeta {
  std::string fingerprint;  // config fingerprint, hex
  std::string decoder;
  int vocab = 0;
  int window = 0;
  double gamma = 0.8;
  int history_len = 3;
  int growth_steps = 3;
  bool growth_inclusive = false;
  std::string verify_mode = "strict";
};

class TrajectoryLogger {
 public:
  static constexpr const char* kSchema = "specjac-trajectory-v1";

  TrajectoryLogger(std::ostream& out, const TrajectoryMeta& meta);

  void begin_run(int run_id, uint64_t seed);

  void log_verify(long iter, long pos, int token, double prob, const std::string& status,
                  bool masked, bool in_candidates, const std::vector<double>& trail,
                  std::optional<int> correction = std::nullopt,
                  std::optional<double> corr_prob = std::nullopt);

  void log_draft(long iter, long pos, int token, const std::string& role, double pbar,
                 double score, int mask, bool in_candidates, double p_before, double p_after,
                 const std::vector<double>& trail);

 private:
  std::ostream& out_;
  int run_ = -1;
};

}  // namespace specjac
