#include <doctest.h>

#include <cmath>

#include "specjac/prob.hpp"

using namespace specjac;

namespace {

Distribution random_distribution(SeededRng& rng, int vocab, bool allow_zeros = false) {
  std::vector<double> w(static_cast<size_t>(vocab));
  for (size_t i = 0; i < w.size(); ++i) {
    w[i] = -std::log(1.0 - rng.next_double());
    if (allow_zeros && rng.next_double() < 0.25) w[i] = 0.0;
  }
  bool any = false;
  for (double v : w) any = any || v > 0.0;
  if (!any) w[0] = 1.0;
  return Distribution::from_unnormalized(std::move(w));
}

}  // namespace

TEST_CASE("distribution invariants enforced") {
  CHECK_THROWS_AS(Distribution({1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Distribution({0.6, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(Distribution({-0.1, 1.1}), std::invalid_argument);
  CHECK_NOTHROW(Distribution({0.5, 0.5}));
  // within the 1e-9 sum tolerance
  CHECK_NOTHROW(Distribution({0.5 + 4e-10, 0.5}));
}

TEST_CASE("softmax of equal logits is uniform") {
  Distribution d = softmax(LogitVector{{0.0, 0.0, 0.0}});
  for (int i = 0; i < 3; ++i) CHECK(d[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax shift invariance") {
  Distribution a = softmax(LogitVector{{1.3, -0.7}});
  Distribution b = softmax(LogitVector{{1.3 + 5.0, -0.7 + 5.0}});
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-14));
  CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-14));
}

TEST_CASE("softmax worked example") {
  Distribution d = softmax(LogitVector{{0.0, std::log(2.0), std::log(4.0)}});
  CHECK(d[0] == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
  CHECK(d[2] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("softmax rejects non-finite input") {
  CHECK_THROWS_AS(softmax(LogitVector{{0.0, std::numeric_limits<double>::infinity()}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(softmax(LogitVector{{0.0, std::nan("")}}), std::invalid_argument);
}

TEST_CASE("log_probs floors zeros") {
  LogitVector l = log_probs(Distribution({1.0, 0.0}), 1e-12);
  CHECK(l.logits[0] == doctest::Approx(0.0));
  CHECK(l.logits[1] == doctest::Approx(std::log(1e-12)));
}

TEST_CASE("log_probs on uniform and a plain pair") {
  LogitVector u = log_probs(Distribution::uniform(4));
  for (double v : u.logits) CHECK(v == doctest::Approx(-std::log(4.0)).epsilon(1e-14));
  LogitVector l = log_probs(Distribution({0.25, 0.75}));
  CHECK(l.logits[0] == doctest::Approx(std::log(0.25)).epsilon(1e-14));
  CHECK(l.logits[1] == doctest::Approx(std::log(0.75)).epsilon(1e-14));
}

TEST_CASE("softmax(log_probs) is the identity on strictly positive distributions") {
  SeededRng rng(11);
  for (int t = 0; t < 200; ++t) {
    Distribution d = random_distribution(rng, 2 + static_cast<int>(rng.next_below(30)));
    Distribution back = softmax(log_probs(d));
    for (int i = 0; i < d.size(); ++i) CHECK(std::abs(back[i] - d[i]) < 1e-9);
  }
}

TEST_CASE("sample: point mass always returns its index") {
  Distribution d({0.0, 1.0, 0.0});
  SeededRng rng(5);
  for (int i = 0; i < 100; ++i) CHECK(sample(d, rng) == 1);
}

TEST_CASE("sample: uniform over 8, 80000 draws land in 10000 +/- 500 per bin") {
  Distribution d = Distribution::uniform(8);
  SeededRng rng(1234);
  std::vector<int> bins(8, 0);
  for (int i = 0; i < 80000; ++i) ++bins[static_cast<size_t>(sample(d, rng))];
  for (int b = 0; b < 8; ++b) CHECK(std::abs(bins[static_cast<size_t>(b)] - 10000) <= 500);
}

TEST_CASE("sample: empirical frequencies converge to the distribution") {
  // Per-entry tolerance 4 * sqrt(p (1-p) / M) at M = 100000.
  const int M = 100000;
  Distribution d({0.5, 0.2, 0.15, 0.1, 0.05});
  SeededRng rng(987);
  std::vector<long> counts(5, 0);
  for (int i = 0; i < M; ++i) ++counts[static_cast<size_t>(sample(d, rng))];
  for (int i = 0; i < 5; ++i) {
    double freq = static_cast<double>(counts[static_cast<size_t>(i)]) / M;
    double tol = 4.0 * std::sqrt(d[i] * (1.0 - d[i]) / M);
    CHECK(std::abs(freq - d[i]) <= tol);
  }
}

TEST_CASE("sample: fixed seed gives identical draw sequences") {
  Distribution d({0.3, 0.3, 0.4});
  SeededRng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(sample(d, a) == sample(d, b));
}

TEST_CASE("sample never returns a zero-probability index") {
  SeededRng rng(77);
  for (int t = 0; t < 200; ++t) {
    Distribution d = random_distribution(rng, 2 + static_cast<int>(rng.next_below(14)), true);
    for (int i = 0; i < 50; ++i) {
      int idx = sample(d, rng);
      CHECK(d[idx] > 0.0);
    }
  }
}

TEST_CASE("top_k_candidates: ratio 1 keeps everything") {
  Distribution d({0.1, 0.2, 0.3, 0.4});
  auto c = top_k_candidates(d, 1.0);
  CHECK(c == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("top_k_candidates worked example and tie rule") {
  auto c = top_k_candidates(Distribution({0.5, 0.3, 0.1, 0.1}), 0.5);
  CHECK(c == std::vector<int>{0, 1});
  auto tie = top_k_candidates(Distribution::uniform(4), 0.25);
  CHECK(tie == std::vector<int>{0});
}

TEST_CASE("tv_distance basics") {
  Distribution p({0.5, 0.5});
  CHECK(tv_distance(p, p) == doctest::Approx(0.0));
  CHECK(tv_distance(Distribution({1.0, 0.0}), Distribution({0.0, 1.0})) == doctest::Approx(1.0));
  CHECK(tv_distance(Distribution({0.5, 0.5}), Distribution({0.9, 0.1})) ==
        doctest::Approx(0.4).epsilon(1e-12));
  CHECK_THROWS_AS(tv_distance(p, Distribution::uniform(3)), std::invalid_argument);
}

TEST_CASE("tv_distance symmetry and triangle inequality, fuzzed") {
  SeededRng rng(3);
  for (int t = 0; t < 10000; ++t) {
    int v = 2 + static_cast<int>(rng.next_below(8));
    Distribution a = random_distribution(rng, v);
    Distribution b = random_distribution(rng, v);
    Distribution c = random_distribution(rng, v);
    double ab = tv_distance(a, b);
    CHECK(ab == doctest::Approx(tv_distance(b, a)).epsilon(1e-14));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(ab <= tv_distance(a, c) + tv_distance(c, b) + 1e-12);
  }
}

TEST_CASE("residual_distribution worked examples") {
  Distribution r1 = residual_distribution(Distribution({0.9, 0.1}), Distribution({0.5, 0.5}));
  CHECK(r1[0] == doctest::Approx(1.0));
  CHECK(r1[1] == doctest::Approx(0.0));

  Distribution r2 =
      residual_distribution(Distribution({0.5, 0.25, 0.25}), Distribution({0.25, 0.5, 0.25}));
  CHECK(r2[0] == doctest::Approx(1.0));
  CHECK(r2[1] == doctest::Approx(0.0));
  CHECK(r2[2] == doctest::Approx(0.0));

  Distribution r3 = residual_distribution(Distribution({0.6, 0.4}), Distribution({0.2, 0.8}));
  CHECK(r3[0] == doctest::Approx(1.0));
  CHECK(r3[1] == doctest::Approx(0.0));
}

TEST_CASE("residual_distribution with no residual mass is a logic error") {
  Distribution q({0.5, 0.5});
  CHECK_THROWS_AS(residual_distribution(q, q), std::logic_error);
}

TEST_CASE("seeded rng determinism and sub-stream derivation") {
  SeededRng a(99), b(99);
  for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(SeededRng::derive(1, 2) == SeededRng::derive(1, 2));
  CHECK(SeededRng::derive(1, 2) != SeededRng::derive(1, 3));
  CHECK(SeededRng::derive(1, 2) != SeededRng::derive(2, 2));
}

TEST_CASE("next_below stays in range") {
  SeededRng rng(4);
  for (int i = 0; i < 1000; ++i) CHECK(rng.next_below(7) < 7);
}
