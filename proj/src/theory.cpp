#include "specjac/theory.hpp"

#include <algorithm>
#include <cmath>

#include "specjac/drafter.hpp"

namespace specjac {

void PerturbationSpec::validate_against(const Distribution& p) const {
  if (static_cast<int>(omega.size()) != p.size() || static_cast<int>(yhat.size()) != p.size()) {
    throw std::invalid_argument("PerturbationSpec: dimension mismatch");
  }
  if (!(m >= 0.0) || !std::isfinite(m)) {
    throw std::invalid_argument("PerturbationSpec: m must be finite and >= 0");
  }
  for (int i = 0; i < p.size(); ++i) {
    double w = omega[static_cast<size_t>(i)];
    int d = yhat[static_cast<size_t>(i)];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("PerturbationSpec: omega must be finite and non-negative");
    }
    if (d != 1 && d != -1) {
      throw std::invalid_argument("PerturbationSpec: yhat entries must be -1 or +1");
    }
    double perturbed = p[i] + m * w * d;
    if (perturbed < 0.0 || perturbed > 1.0) {
      throw std::invalid_argument("PerturbationSpec: perturbed entry leaves [0, 1]");
    }
  }
}

IdealDirection ideal_direction(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) throw std::invalid_argument("ideal_direction: dimension mismatch");
  IdealDirection out;
  out.y.resize(static_cast<size_t>(p.size()));
  for (int i = 0; i < p.size(); ++i) {
    if (q[i] > p[i]) {
      out.y[static_cast<size_t>(i)] = 1;
    } else if (q[i] < p[i]) {
      out.y[static_cast<size_t>(i)] = -1;
    } else {
      out.y[static_cast<size_t>(i)] = 1;
      ++out.ties;
    }
  }
  return out;
}

double direction_accuracy(const Distribution& p, const Distribution& q,
                          std::span<const int> yhat) {
  if (static_cast<int>(yhat.size()) != p.size()) {
    throw std::invalid_argument("direction_accuracy: dimension mismatch");
  }
  IdealDirection ideal = ideal_direction(p, q);
  double acc = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (yhat[static_cast<size_t>(i)] == ideal.y[static_cast<size_t>(i)]) acc += p[i];
  }
  return acc;
}

double exact_tv_delta(const Distribution& p, const Distribution& q,
                      const PerturbationSpec& spec) {
  if (p.size() != q.size()) throw std::invalid_argument("exact_tv_delta: dimension mismatch");
  spec.validate_against(p);
  std::vector<double> after(static_cast<size_t>(p.size()));
  std::vector<double> before(static_cast<size_t>(p.size()));
  for (int i = 0; i < p.size(); ++i) {
    double perturbed = p[i] + spec.m * spec.omega[static_cast<size_t>(i)] *
                                  spec.yhat[static_cast<size_t>(i)];
    after[static_cast<size_t>(i)] = std::abs(perturbed - q[i]);
    before[static_cast<size_t>(i)] = std::abs(p[i] - q[i]);
  }
  return 0.5 * stable_sum(after) - 0.5 * stable_sum(before);
}

double first_order_tv_delta(const Distribution& p, const Distribution& q,
                            const PerturbationSpec& spec) {
  if (p.size() != q.size()) throw std::invalid_argument("first_order_tv_delta: dimension mismatch");
  if (static_cast<int>(spec.omega.size()) != p.size() ||
      static_cast<int>(spec.yhat.size()) != p.size()) {
    throw std::invalid_argument("first_order_tv_delta: dimension mismatch");
  }
  double sum = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] == q[i]) continue;  // sign undefined at exact ties
    double sgn = p[i] > q[i] ? 1.0 : -1.0;
    sum += sgn * spec.omega[static_cast<size_t>(i)] * spec.yhat[static_cast<size_t>(i)];
  }
  return spec.m * 0.5 * sum;
}

DirectionReport decomposition_check(const Distribution& p, const Distribution& q,
                                    const PerturbationSpec& spec) {
  DirectionReport rep;
  IdealDirection ideal = ideal_direction(p, q);
  rep.ties = ideal.ties;
  rep.Q = direction_accuracy(p, q, spec.yhat);
  rep.tv_before = tv_distance(p, q);
  rep.tv_after_exact = rep.tv_before + exact_tv_delta(p, q, spec);
  rep.tv_after_first_order = rep.tv_before + first_order_tv_delta(p, q, spec);

  // Moments over the non-tie tokens, under uniform and p weighting. The
  // uniform decomposition is algebraically identical to the first-order sum;
  // the p-weighted one mirrors the expectation form of the argument.
  long n = 0;
  double mass = 0.0;
  double agree_n = 0.0;
  double sum_a = 0.0, sum_w = 0.0, sum_aw = 0.0;           // uniform moments
  double psum_a = 0.0, psum_w = 0.0, psum_aw = 0.0;        // p-weighted moments
  bool gap_ok = true;
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] == q[i]) continue;
    double a = static_cast<double>(ideal.y[static_cast<size_t>(i)] *
                                   spec.yhat[static_cast<size_t>(i)]);
    double w = spec.omega[static_cast<size_t>(i)];
    ++n;
    mass += p[i];
    if (a > 0) agree_n += 1.0;
    sum_a += a;
    sum_w += w;
    sum_aw += a * w;
    psum_a += p[i] * a;
    psum_w += p[i] * w;
    psum_aw += p[i] * a * w;
    if (w > 0.0 && spec.m * w >= std::abs(p[i] - q[i])) gap_ok = false;
  }
  rep.gap_ok = gap_ok;
  if (n > 0) {
    double dn = static_cast<double>(n);
    rep.q_uniform = agree_n / dn;
    rep.e_omega_uniform = sum_w / dn;
    double mean_a = sum_a / dn;
    rep.cov_uniform = sum_aw / dn - mean_a * rep.e_omega_uniform;
    rep.delta_decomp_uniform =
        -spec.m * 0.5 * dn * (mean_a * rep.e_omega_uniform + rep.cov_uniform);
  }
  if (mass > 0.0) {
    double ea = psum_a / mass;
    rep.e_omega = psum_w / mass;
    rep.cov = psum_aw / mass - ea * rep.e_omega;
    rep.delta_decomp_weighted = -spec.m * 0.5 * (ea * rep.e_omega + rep.cov);
  }
  return rep;
}

ExtractedDirection vp_direction_extractor(const Distribution& p, std::span<const double> score,
                                          std::span<const uint8_t> mask,
                                          std::span<const int> candidates, double m) {
  if (!(m > 0.0)) throw std::invalid_argument("vp_direction_extractor: m must be positive");
  ExtractedDirection out;
  out.fused = bayesian_fusion(p, score, mask, candidates);
  out.yhat.assign(static_cast<size_t>(p.size()), -1);
  out.omega.resize(static_cast<size_t>(p.size()));
  // Direction of the realized movement: a boosted token normally rises, but
  // renormalization against a stronger boost elsewhere can net-shrink it, so
  // the sign comes from the fusion output itself. Unmoved tokens keep the
  // boosted-set convention; their weight is zero either way.
  for (int x : candidates) {
    if (mask[static_cast<size_t>(x)] && score[static_cast<size_t>(x)] > 0.0 &&
        out.fused[x] == p[x]) {
      out.yhat[static_cast<size_t>(x)] = 1;
    }
  }
  for (int i = 0; i < p.size(); ++i) {
    if (out.fused[i] > p[i]) out.yhat[static_cast<size_t>(i)] = 1;
    out.omega[static_cast<size_t>(i)] = std::abs(out.fused[i] - p[i]) / m;
  }
  return out;
}

Distribution random_interior_distribution(SeededRng& rng, int vocab, double boundary_mix) {
  if (!(boundary_mix >= 0.0) || boundary_mix >= 1.0) {
    throw std::invalid_argument("random_interior_distribution: boundary_mix must be in [0, 1)");
  }
  std::vector<double> w(static_cast<size_t>(vocab));
  for (double& x : w) x = -std::log(1.0 - rng.next_double());  // Exp(1) => Dirichlet(1)
  double total = stable_sum(w);
  for (double& x : w) x = (1.0 - boundary_mix) * (x / total) + boundary_mix / vocab;
  return Distribution::from_unnormalized(std::move(w));
}

std::vector<int> synthetic_predictor(const Distribution& p, const Distribution& q,
                                     double q_target, SeededRng& rng) {
  if (q_target < 0.0 || q_target > 1.0) throw std::invalid_argument("synthetic_predictor: target out of range");
  IdealDirection ideal = ideal_direction(p, q);
  std::vector<int> nontie;
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] != q[i]) nontie.push_back(i);
  }
  // Agree on an exact count of non-tie tokens, chosen uniformly.
  size_t k = static_cast<size_t>(std::llround(q_target * static_cast<double>(nontie.size())));
  for (size_t i = 0; i + 1 < nontie.size(); ++i) {
    size_t j = i + static_cast<size_t>(rng.next_below(nontie.size() - i));
    std::swap(nontie[i], nontie[j]);
  }
  std::vector<int> yhat(static_cast<size_t>(p.size()));
  for (int i = 0; i < p.size(); ++i) {
    yhat[static_cast<size_t>(i)] = -ideal.y[static_cast<size_t>(i)];
  }
  for (size_t i = 0; i < k && i < nontie.size(); ++i) {
    int x = nontie[i];
    yhat[static_cast<size_t>(x)] = ideal.y[static_cast<size_t>(x)];
  }
  return yhat;
}

std::vector<TheoryTrialRow> run_direction_trials(uint64_t seed, int n_trials, int vocab, double m,
                                                 double q_target, bool omega_constant) {
  if (n_trials < 1) throw std::invalid_argument("run_direction_trials: need at least one trial");
  constexpr double kBoundaryMix = 0.1;
  if (!(m * vocab < kBoundaryMix)) {
    throw std::invalid_argument("run_direction_trials: m too large for the interior floor");
  }
  std::vector<TheoryTrialRow> rows;
  rows.reserve(static_cast<size_t>(n_trials));
  for (int t = 0; t < n_trials; ++t) {
    SeededRng rng(SeededRng::derive(seed, static_cast<uint64_t>(t)));
    Distribution p = random_interior_distribution(rng, vocab, kBoundaryMix);
    Distribution q = random_interior_distribution(rng, vocab, kBoundaryMix);
    PerturbationSpec spec;
    spec.m = m;
    spec.yhat = synthetic_predictor(p, q, q_target, rng);
    spec.omega.resize(static_cast<size_t>(vocab));
    for (double& w : spec.omega) w = omega_constant ? 1.0 : rng.next_double();

    DirectionReport rep = decomposition_check(p, q, spec);
    TheoryTrialRow row;
    row.trial = static_cast<uint64_t>(t);
    row.Q = rep.Q;
    row.e_omega = rep.e_omega;
    row.cov = rep.cov;
    row.tv_before = rep.tv_before;
    row.delta_exact = rep.tv_after_exact - rep.tv_before;
    row.delta_fo = rep.tv_after_first_order - rep.tv_before;
    row.residual = std::abs(row.delta_exact - row.delta_fo);
    row.gap_ok = rep.gap_ok;
    row.ties = rep.ties;
    rows.push_back(row);
  }
  return rows;
}

TaylorScalingReport taylor_remainder_scaling(uint64_t seed, long n_trials, int vocab, double m) {
  TaylorScalingReport rep;
  rep.trials = n_trials;
  constexpr double kBoundaryMix = 0.1;
  if (!(m * vocab < kBoundaryMix)) {
    throw std::invalid_argument("taylor_remainder_scaling: m too large for the interior floor");
  }
  double sum_full = 0.0;
  double sum_half = 0.0;
  for (long t = 0; t < n_trials; ++t) {
    SeededRng rng(SeededRng::derive(seed, static_cast<uint64_t>(t)));
    Distribution p = random_interior_distribution(rng, vocab, kBoundaryMix);
    Distribution q = random_interior_distribution(rng, vocab, kBoundaryMix);
    PerturbationSpec spec;
    spec.m = m;
    spec.omega.resize(static_cast<size_t>(vocab));
    spec.yhat.resize(static_cast<size_t>(vocab));
    for (int i = 0; i < vocab; ++i) {
      spec.omega[static_cast<size_t>(i)] = rng.next_double();
      spec.yhat[static_cast<size_t>(i)] = rng.next_u64() & 1 ? 1 : -1;
    }
    bool crossed = false;
    for (int i = 0; i < vocab; ++i) {
      if (spec.omega[static_cast<size_t>(i)] > 0.0 &&
          m * spec.omega[static_cast<size_t>(i)] >= std::abs(p[i] - q[i])) {
        crossed = true;
        break;
      }
    }
    if (crossed) ++rep.crossing_trials_full;

    sum_full += std::abs(exact_tv_delta(p, q, spec) - first_order_tv_delta(p, q, spec));
    spec.m = m / 2.0;
    sum_half += std::abs(exact_tv_delta(p, q, spec) - first_order_tv_delta(p, q, spec));
  }
  rep.mean_abs_remainder_full = sum_full / static_cast<double>(n_trials);
  rep.mean_abs_remainder_half = sum_half / static_cast<double>(n_trials);
  rep.ratio = rep.mean_abs_remainder_half > 0.0
                  ? rep.mean_abs_remainder_full / rep.mean_abs_remainder_half
                  : std::numeric_limits<double>::infinity();
  return rep;
}

}  // namespace specjac
