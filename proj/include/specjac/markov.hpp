#pragma once

// Seeded, exactly enumerable autoregressive token models. These play the
// role of the base model in decode runs, and the exact sequence enumeration
// is the brute-force oracle the losslessness tests compare against.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "specjac/prob.hpp"

namespace specjac {

/// Conditioning signal for a decode run: integer id, fixed prefix tokens,
/// target length T (prefix length < T).
struct Prompt {
  int id = 0;
  std::vector<int> prefix;
  int target_len = 0;

  int free_tokens() const { return target_len - static_cast<int>(prefix.size()); }
  void validate() const;
};

/// Order-k Markov model over a vocabulary of V tokens. Each context (the
/// last `order` tokens, front-padded with a virtual begin marker that is not
/// part of the vocabulary) maps to a stored Distribution. Rows are built
/// deterministically from the seed by normalizing i.i.d. Gamma(concentration)
/// draws, optionally mixed with a global attractor row (the "drifting"
/// variant) which strengthens cross-context agreement and hence Jacobi
/// convergence. Immutable after construction.
class MarkovModel {
 public:
  static MarkovModel build(uint64_t seed, int order, int vocab, double concentration,
                           double attractor_weight = 0.0);

  // Explicit rows, for tests. Rows are indexed by context_index().
  static MarkovModel from_rows(int order, int vocab, std::vector<Distribution> rows);

  int order() const { return order_; }
  int vocab() const { return vocab_; }
  uint64_t seed() const { return seed_; }
  double concentration() const { return concentration_; }
  double attractor_weight() const { return attractor_weight_; }
  size_t row_count() const { return rows_.size(); }
  const Distribution& row(size_t context_index) const { return rows_.at(context_index); }

  /// The stored row for the last `order` tokens of the prefix (begin-padded).
  /// Any token index >= vocab throws.
  const Distribution& next_token_distribution(std::span<const int> prefix) const;

  /// Context row index for a prefix; begin marker encoded as symbol V in
  /// base V+1, so unreachable mixed contexts simply hold unused rows.
  size_t context_index(std::span<const int> prefix) const;

  void save(const std::filesystem::path& path) const;
  static MarkovModel load(const std::filesystem::path& path);

 private:
  MarkovModel() = default;

  int order_ = 1;
  int vocab_ = 2;
  uint64_t seed_ = 0;
  double concentration_ = 0.0;       // 0 marks hand-built tables
  double attractor_weight_ = 0.0;
  std::vector<Distribution> rows_;
};

/// Exact law of the completion given the prompt, chain-rule product over all
/// V^(T - |prefix|) completions. Probabilities indexed by the completion read
/// as a base-V number, most significant digit first.
struct ExactSequenceDistribution {
  int vocab = 0;
  int free_len = 0;
  std::vector<double> probs;

  size_t index_of(std::span<const int> completion) const;
  double prob_of(std::span<const int> completion) const;
};

/// Brute-force enumeration oracle. State spaces above 10^7 throw a
/// resource-limit error (std::length_error).
ExactSequenceDistribution exact_sequence_distribution(const MarkovModel& model,
                                                      const Prompt& prompt);

struct ArResult {
  std::vector<int> tokens;  // full sequence including the prompt prefix
  long nfe = 0;             // model evaluations: exactly T - |prefix|
};

/// Plain sequential decoding: one model evaluation per generated token.
ArResult autoregressive_decode(const MarkovModel& model, const Prompt& prompt, SeededRng& rng);

/// Greedy (argmax) sequential decoding; the fixed point greedy Jacobi must hit.
ArResult greedy_autoregressive_decode(const MarkovModel& model, const Prompt& prompt);

/// Deterministic prompt batch: `count` prompts with uniform random prefixes.
std::vector<Prompt> make_prompts(uint64_t seed, int count, int prefix_len, int target_len,
                                 int vocab);

}  // namespace specjac
