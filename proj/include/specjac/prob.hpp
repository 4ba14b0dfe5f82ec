#pragma once

// Numerically safe probability-vector primitives. Everything downstream
// (toy models, decode engine, drafters, theory lab) trades in Distribution
// values produced and consumed here.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace specjac {

// Compensated (Kahan) accumulation; vocabularies up to 64k stay well within
// the 1e-9 sum tolerance with this.
double stable_sum(std::span<const double> values);

/// Normalized probability vector over a finite vocabulary (V >= 2).
/// Invariants: entries >= 0, sum within 1e-9 of 1.
class Distribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  Distribution() = default;
  explicit Distribution(std::vector<double> probs);

  static Distribution uniform(int vocab);
  static Distribution point_mass(int vocab, int index);
  // Normalizes non-negative weights with positive total mass.
  static Distribution from_unnormalized(std::vector<double> weights);

  int size() const { return static_cast<int>(probs_.size()); }
  double operator[](int i) const { return probs_[static_cast<size_t>(i)]; }
  std::span<const double> values() const { return probs_; }
  const std::vector<double>& vec() const { return probs_; }

  bool operator==(const Distribution& other) const = default;

 private:
  std::vector<double> probs_;
};

/// Unnormalized log-space scores over the vocabulary. All entries finite.
struct LogitVector {
  std::vector<double> logits;

  int size() const { return static_cast<int>(logits.size()); }
};

/// Deterministic RNG: identical seed + identical draw sequence gives
/// bit-identical outputs (mt19937_64 is fully specified by the standard;
/// the double mapping is explicit, no library distributions involved).
/// Single-owner mutable; give each concurrent run its own instance.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }
  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n);

  // Stable sub-stream derivation (splitmix64 mix), for per-job seeding.
  static uint64_t derive(uint64_t seed, uint64_t stream);

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Softmax with max-subtraction; shift-invariant by construction.
Distribution softmax(const LogitVector& l);

/// Elementwise ln(max(p_i, eps)); the floor keeps log-space math finite.
LogitVector log_probs(const Distribution& d, double eps = 1e-12);

/// Inverse-CDF sampling. Never returns an index with zero probability.
int sample(const Distribution& d, SeededRng& rng);

/// Indices of the ceil(ratio * V) largest entries; ties break toward the
/// lower index. Returned sorted ascending.
std::vector<int> top_k_candidates(const Distribution& d, double ratio);

/// Total variation distance: 0.5 * sum |p_i - q_i|, in [0, 1].
double tv_distance(const Distribution& p, const Distribution& q);

/// Normalized max(0, q - p): the residual a rejection resamples from.
/// Throws std::logic_error when the residual has no mass (q <= p everywhere),
/// which a correct caller can never trigger.
Distribution residual_distribution(const Distribution& q, const Distribution& p);

}  // namespace specjac
