#pragma once

// Numerical verification of the total-variation argument behind the
// verification-prediction drafter: model the fused distribution as a
// perturbation p' = p + m * omega * yhat, compare the exact TV change
// against its first-order expansion, and decompose the expansion into the
// (2Q - 1) * E[omega] + Cov(y yhat, omega) form. The TV of a perturbed
// vector is piecewise linear in m, so away from kink crossings the
// first-order term is exact; remainders come from trials where a token's
// p-q gap is crossed, and their aggregate shrinks quadratically in m.

#include <cstdint>
#include <vector>

#include "specjac/prob.hpp"

namespace specjac {

/// Directed perturbation: p'(x) = p(x) + m * omega(x) * yhat(x).
struct PerturbationSpec {
  double m = 0.0;
  std::vector<double> omega;  // non-negative weights
  std::vector<int> yhat;      // directions, each -1 or +1

  void validate_against(const Distribution& p) const;
};

struct IdealDirection {
  std::vector<int> y;  // sign(q - p); exact ties get +1
  int ties = 0;
};

IdealDirection ideal_direction(const Distribution& p, const Distribution& q);

/// Probability-weighted accuracy: sum_x p(x) * [yhat(x) == y(x)].
double direction_accuracy(const Distribution& p, const Distribution& q,
                          std::span<const int> yhat);

/// D_TV(p + delta, q) - D_TV(p, q), by direct evaluation.
double exact_tv_delta(const Distribution& p, const Distribution& q, const PerturbationSpec& spec);

/// First-order change: m/2 * sum_{x: p != q} sign(p - q) * omega * yhat.
/// Exact ties are excluded from the sum.
double first_order_tv_delta(const Distribution& p, const Distribution& q,
                            const PerturbationSpec& spec);

struct DirectionReport {
  double Q = 0.0;          // probability-weighted accuracy
  double q_uniform = 0.0;  // plain agreement fraction over non-ties
  double e_omega = 0.0;    // E_p[omega] over non-ties
  double cov = 0.0;        // Cov_p(y yhat, omega) over non-ties
  double e_omega_uniform = 0.0;
  double cov_uniform = 0.0;
  double tv_before = 0.0;
  double tv_after_exact = 0.0;
  double tv_after_first_order = 0.0;
  // First-order delta rebuilt from the decomposition under each weighting.
  // The uniform form is an algebraic identity with the first-order sum.
  double delta_decomp_uniform = 0.0;
  double delta_decomp_weighted = 0.0;
  int ties = 0;
  bool gap_ok = false;  // no |p - q| gap within m * omega at any weighted token
};

DirectionReport decomposition_check(const Distribution& p, const Distribution& q,
                                    const PerturbationSpec& spec);

/// Maps the drafter's actual fusion onto the perturbation model: yhat is +1
/// exactly where the fusion boosts, and omega = |p' - p| / m, so that the
/// perturbation reproduces the fused distribution identically at the given m.
struct ExtractedDirection {
  std::vector<int> yhat;
  std::vector<double> omega;
  Distribution fused;
};

ExtractedDirection vp_direction_extractor(const Distribution& p, std::span<const double> score,
                                          std::span<const uint8_t> mask,
                                          std::span<const int> candidates, double m = 1.0);

/// Random simplex point bounded away from the boundary:
/// (1 - boundary_mix) * Dirichlet(1) + boundary_mix * uniform. The floor
/// keeps p + m * omega * yhat inside [0, 1] for the m used in the trials.
Distribution random_interior_distribution(SeededRng& rng, int vocab, double boundary_mix = 0.1);

/// Predictor that agrees with the ideal direction on an exact round(q_target
/// * n) count of the non-tie tokens, chosen uniformly at random.
std::vector<int> synthetic_predictor(const Distribution& p, const Distribution& q,
                                     double q_target, SeededRng& rng);

struct TheoryTrialRow {
  uint64_t trial = 0;
  double Q = 0.0;
  double e_omega = 0.0;
  double cov = 0.0;
  double tv_before = 0.0;
  double delta_exact = 0.0;
  double delta_fo = 0.0;
  double residual = 0.0;
  bool gap_ok = false;
  int ties = 0;
};

/// Seeded (p, q, predictor) trials at the given accuracy target.
/// omega_constant selects omega = 1 everywhere, otherwise i.i.d. U(0, 1).
std::vector<TheoryTrialRow> run_direction_trials(uint64_t seed, int n_trials, int vocab, double m,
                                                 double q_target, bool omega_constant);

struct TaylorScalingReport {
  double mean_abs_remainder_full = 0.0;  // at m
  double mean_abs_remainder_half = 0.0;  // at m / 2
  double ratio = 0.0;                    // full / half; approaches 4 for smooth gap laws
  long crossing_trials_full = 0;
  long trials = 0;
};

/// Aggregate |exact - first_order| at m versus m / 2 over seeded random
/// trials (random omega and directions, no gap filtering).
TaylorScalingReport taylor_remainder_scaling(uint64_t seed, long n_trials, int vocab, double m);

}  // namespace specjac
