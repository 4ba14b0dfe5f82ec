#include "specjac/prob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace specjac {

double stable_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    double y = v - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

namespace {

void validate_probs(const std::vector<double>& probs) {
  if (probs.size() < 2) {
    throw std::invalid_argument("Distribution needs a vocabulary of size >= 2");
  }
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("Distribution entries must be finite and non-negative");
    }
  }
  double sum = stable_sum(probs);
  if (std::abs(sum - 1.0) > Distribution::kSumTolerance) {
    throw std::invalid_argument("Distribution entries must sum to 1 within 1e-9");
  }
}

}  // namespace

Distribution::Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
  validate_probs(probs_);
}

Distribution Distribution::uniform(int vocab) {
  if (vocab < 2) throw std::invalid_argument("uniform: vocab must be >= 2");
  return Distribution(std::vector<double>(static_cast<size_t>(vocab), 1.0 / vocab));
}

Distribution Distribution::point_mass(int vocab, int index) {
  if (vocab < 2) throw std::invalid_argument("point_mass: vocab must be >= 2");
  if (index < 0 || index >= vocab) throw std::invalid_argument("point_mass: index out of range");
  std::vector<double> p(static_cast<size_t>(vocab), 0.0);
  p[static_cast<size_t>(index)] = 1.0;
  return Distribution(std::move(p));
}

Distribution Distribution::from_unnormalized(std::vector<double> weights) {
  if (weights.size() < 2) throw std::invalid_argument("from_unnormalized: vocab must be >= 2");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("from_unnormalized: weights must be finite and non-negative");
    }
  }
  double total = stable_sum(weights);
  if (!(total > 0.0)) throw std::invalid_argument("from_unnormalized: total mass must be positive");
  for (double& w : weights) w /= total;
  return Distribution(std::move(weights));
}

uint64_t SeededRng::next_below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("next_below: n must be positive");
  // Rejection sampling over the top bits keeps the draw unbiased.
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

uint64_t SeededRng::derive(uint64_t seed, uint64_t stream) {
  // splitmix64 finalizer over the combined value.
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Distribution softmax(const LogitVector& l) {
  if (l.logits.size() < 2) throw std::invalid_argument("softmax: vocab must be >= 2");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double v : l.logits) {
    if (!std::isfinite(v)) throw std::invalid_argument("softmax: logits must be finite");
    max_logit = std::max(max_logit, v);
  }
  std::vector<double> exps(l.logits.size());
  for (size_t i = 0; i < l.logits.size(); ++i) {
    exps[i] = std::exp(l.logits[i] - max_logit);
  }
  double total = stable_sum(exps);
  for (double& e : exps) e /= total;
  return Distribution(std::move(exps));
}

LogitVector log_probs(const Distribution& d, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("log_probs: eps must be positive");
  LogitVector out;
  out.logits.reserve(static_cast<size_t>(d.size()));
  for (double p : d.values()) {
    out.logits.push_back(std::log(std::max(p, eps)));
  }
  return out;
}

int sample(const Distribution& d, SeededRng& rng) {
  double u = rng.next_double();
  double cum = 0.0;
  int last_positive = -1;
  for (int i = 0; i < d.size(); ++i) {
    double p = d[i];
    if (p <= 0.0) continue;
    last_positive = i;
    cum += p;
    if (u < cum) return i;
  }
  // Rounding can leave cum marginally below 1; fall back to the last
  // positive entry so a zero-probability index is never returned.
  return last_positive;
}

std::vector<int> top_k_candidates(const Distribution& d, double ratio) {
  if (!(ratio > 0.0) || ratio > 1.0) {
    throw std::invalid_argument("top_k_candidates: ratio must be in (0, 1]");
  }
  int v = d.size();
  int k = static_cast<int>(std::ceil(ratio * v));
  k = std::clamp(k, 1, v);
  std::vector<int> idx(static_cast<size_t>(v));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (d[a] != d[b]) return d[a] > d[b];
    return a < b;
  });
  idx.resize(static_cast<size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

double tv_distance(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: dimension mismatch");
  std::vector<double> diffs(static_cast<size_t>(p.size()));
  for (int i = 0; i < p.size(); ++i) {
    diffs[static_cast<size_t>(i)] = std::abs(p[i] - q[i]);
  }
  return 0.5 * stable_sum(diffs);
}

Distribution residual_distribution(const Distribution& q, const Distribution& p) {
  if (p.size() != q.size()) throw std::invalid_argument("residual_distribution: dimension mismatch");
  std::vector<double> res(static_cast<size_t>(q.size()));
  for (int i = 0; i < q.size(); ++i) {
    res[static_cast<size_t>(i)] = std::max(0.0, q[i] - p[i]);
  }
  double mass = stable_sum(res);
  if (!(mass > 0.0)) {
    throw std::logic_error("residual_distribution: no residual mass (rejection impossible)");
  }
  for (double& r : res) r /= mass;
  return Distribution(std::move(res));
}

}  // namespace specjac
