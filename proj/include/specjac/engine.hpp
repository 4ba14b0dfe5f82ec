#pragma once

// Jacobi decoding baseline and the speculative Jacobi draft-then-verify
// loop, parameterized by a pluggable drafter so the baseline and the
// verification-prediction drafter share one verification path.
//
// Loop shape (one combined model pass per iteration, NFE = pass count):
//   1. Parallel pass: q_i = p(. | prefix, window_<i) for every slot, the
//      window tokens serving as stale context.
//   2. Sequential sweep: accept slot i's token x with min(1, q_i(x)/d_i(x))
//      where d_i is the distribution x was actually sampled from; the first
//      rejection commits a residual-resampled correction and stops. Each
//      committed token's law is exactly the model conditional, so strict-mode
//      output follows the autoregressive law regardless of the drafter.
//   3. Surviving q_i seed the next iteration's drafts (and the position
//      histories); the window refills to W, fresh tail slots drafting
//      from a uniform placeholder until a pass reaches them.
//
// A decode run is strictly sequential. Independent runs may execute
// concurrently when each owns its state, drafter, and SeededRng; the model
// is immutable and freely shared.

#include <optional>
#include <vector>

#include "specjac/drafter.hpp"
#include "specjac/history.hpp"
#include "specjac/markov.hpp"
#include "specjac/prob.hpp"
#include "specjac/trajectory.hpp"

namespace specjac {

/// Decode exceeded its iteration safety valve.
struct DecodeAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EngineConfig {
  VerifyMode verify_mode = VerifyMode::strict;
  long max_iter_factor = 16;  // abort after max_iter_factor * T iterations
  double accept_eps = 1e-12;  // floor for the acceptance-ratio denominator
  int history_len = 3;        // snapshot depth retained per position
};

struct RunStats {
  long nfe = 0;         // parallel model passes
  long generated = 0;   // tokens generated beyond the prompt prefix
  long iterations = 0;  // decode-loop iterations
  std::vector<int> run_lengths;  // accepted draft tokens per verify sweep
  long drafted = 0;
  long accepted = 0;
  long corrections = 0;
  double acceptance_rate = 0.0;
  long fallback_windows = 0;  // greedy Jacobi windows decoded sequentially

  double mean_run_length() const {
    if (run_lengths.empty()) return 0.0;
    long total = 0;
    for (int r : run_lengths) total += r;
    return static_cast<double>(total) / static_cast<double>(run_lengths.size());
  }
};

/// Accepted prefix plus the current draft window. window_dists[i] is the
/// distribution window[i] was sampled from (the strict verification target);
/// window_raw[i] is the raw model/placeholder distribution at the slot (the
/// paper-mode target).
struct DecodeState {
  std::vector<int> prefix;
  std::vector<int> window;
  std::vector<Distribution> window_dists;
  std::vector<Distribution> window_raw;
  std::vector<uint8_t> window_masked;
  std::vector<uint8_t> window_cand;
  long iteration = 0;

  long base_position() const { return static_cast<long>(prefix.size()); }
};

/// One parallel evaluation: slot i's distribution conditions on the prefix
/// plus the current window tokens before i. Counts as one NFE.
std::vector<Distribution> jacobi_step(const MarkovModel& model, std::span<const int> prefix,
                                      std::span<const int> window);

struct VerifyOutcome {
  int accepted = 0;
  std::optional<int> correction;
  int consumed = 0;
  std::vector<Distribution> fresh;  // this pass's q_i for every slot
};

/// One pass plus one verification sweep. Accepted tokens and a possible
/// correction are appended to state.prefix; the window arrays are left
/// untouched so the caller can inspect and redraft.
VerifyOutcome verify_window(const MarkovModel& model, DecodeState& state, SeededRng& rng,
                            VerifyMode mode, double eps = 1e-12);

struct SpecResult {
  std::vector<int> tokens;
  RunStats stats;
};

SpecResult run_speculative_jacobi(const MarkovModel& model, const Prompt& prompt, int window_size,
                                  Drafter& drafter, SeededRng& rng, const EngineConfig& cfg = {},
                                  TrajectoryLogger* log = nullptr, int run_id = 0);

struct GreedyJacobiResult {
  std::vector<int> tokens;
  RunStats stats;
};

/// Greedy Jacobi baseline: per window, iterate argmax updates until the
/// window stops changing (or max_iters, then a flagged sequential fallback).
/// max_iters <= 0 selects the guaranteed bound w + 1.
GreedyJacobiResult run_greedy_jacobi(const MarkovModel& model, const Prompt& prompt,
                                     int window_size, int max_iters = 0);

}  // namespace specjac
