#pragma once

// Token drafting. The baseline drafter samples straight from the current
// window distributions. The verification-prediction drafter builds an
// exponentially weighted reference from each position's probability history,
// scores tokens whose probability keeps growing across Jacobi iterations,
// and fuses that prior into the drafting distribution before sampling:
//
//   pbar = sum_k gamma^k p_{t-k} / sum_k gamma^k        (reference)
//   S    = log p_t - log pbar                            (prediction score)
//   M    = 1 iff the probability rose strictly N times   (growth mask)
//   p'   = renormalize(p_t * exp(M * S) on candidates)   (fusion)
//
// Verification stays untouched; only the sampling distribution changes, and
// in strict mode the verifier is told exactly which distribution was used.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specjac/history.hpp"
#include "specjac/prob.hpp"

namespace specjac {

class TrajectoryLogger;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class VerifyMode { strict, paper };

std::string to_string(VerifyMode mode);
VerifyMode verify_mode_from_string(const std::string& s);

struct VPConfig {
  double gamma = 0.8;        // EWA decay factor, in (0,1); sweeps may relax to 1.0
  int history_len = 3;       // L: EWA history depth
  int growth_steps = 3;      // N: required strict pairwise increases
  double topk_ratio = 0.10;  // candidate-set fraction for fusion
  double eps = 1e-12;        // log-space floor
  VerifyMode verify_mode = VerifyMode::strict;
  bool ewa_includes_current = true;  // include the newest value as the k=0 term
  bool growth_inclusive = false;     // true: N means N+1 pairwise increases
  double score_clamp = 0.0;          // 0 = unclamped; otherwise |S| <= clamp

  // `relaxed` admits sweep boundary values (gamma = 1, N = 0) with a note on
  // stderr instead of a hard error.
  void validate(bool relaxed = false) const;
};

/// Reference probability: decay-weighted aggregate of the token's recent
/// trajectory. `trail` is oldest-first and includes the current value as its
/// last element; at most `history_len` past values enter the sum.
double ewa_reference(std::span<const double> trail, double gamma, int history_len,
                     bool include_current = true);

/// Log-space gain of the current probability over the reference.
double prediction_score(double p_t, double pbar_t, double eps = 1e-12);

/// 1 iff the trail's most recent `required_increases` steps are all strictly
/// increasing and that many comparisons exist. `trail` is oldest-first with
/// the current value last.
int growth_mask(std::span<const double> trail, int required_increases);

/// Posterior drafting distribution: candidates with mask 1 get their mass
/// multiplied by exp(score); everything renormalizes. With no active boost
/// the input is returned unchanged (bit-exact).
Distribution bayesian_fusion(const Distribution& p, std::span<const double> score,
                             std::span<const uint8_t> mask, std::span<const int> candidates);

/// One window slot as the drafter sees it.
struct DraftSlot {
  Distribution p;          // current distribution at this position
  long position = 0;       // absolute sequence position
  bool from_model = true;  // false: uniform fill for a slot no pass has reached
};

struct DraftedToken {
  int token = 0;
  Distribution dist;           // the distribution the token was sampled from
  bool masked = false;         // growth mask applied to this token at draft time
  bool in_candidates = false;  // token was in the fusion candidate set
};

class Drafter {
 public:
  virtual ~Drafter() = default;
  virtual std::string name() const = 0;
  virtual std::vector<DraftedToken> draft(std::span<const DraftSlot> slots,
                                          const HistoryStore& history, SeededRng& rng,
                                          TrajectoryLogger* log, long iter) = 0;
};

/// Baseline: sample each slot directly from its current distribution.
class SjdDrafter final : public Drafter {
 public:
  std::string name() const override { return "sjd"; }
  std::vector<DraftedToken> draft(std::span<const DraftSlot> slots, const HistoryStore& history,
                                  SeededRng& rng, TrajectoryLogger* log, long iter) override;
};

/// Verification-prediction drafter.
class VpDrafter final : public Drafter {
 public:
  explicit VpDrafter(VPConfig config, bool relaxed_validation = false);

  std::string name() const override { return "sjd-vp"; }
  const VPConfig& config() const { return config_; }

  std::vector<DraftedToken> draft(std::span<const DraftSlot> slots, const HistoryStore& history,
                                  SeededRng& rng, TrajectoryLogger* log, long iter) override;

  /// Masked tokens whose score came out negative. Expected to stay zero at
  /// the default N = L; counted rather than clipped so fuzzing can surface
  /// counterexamples for other configurations.
  long negative_score_count() const { return negative_score_count_; }

 private:
  int required_increases() const {
    return config_.growth_inclusive ? config_.growth_steps + 1 : config_.growth_steps;
  }

  VPConfig config_;
  long negative_score_count_ = 0;
};

}  // namespace specjac
