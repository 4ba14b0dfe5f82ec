#include <doctest.h>

#include <cmath>

#include "specjac/drafter.hpp"
#include "specjac/history.hpp"

using namespace specjac;

namespace {

Distribution random_distribution(SeededRng& rng, int vocab) {
  std::vector<double> w(static_cast<size_t>(vocab));
  for (double& x : w) x = -std::log(1.0 - rng.next_double());
  return Distribution::from_unnormalized(std::move(w));
}

// Snapshot with the given probability at `token`, remainder spread evenly.
Distribution snapshot_with(int vocab, int token, double p) {
  std::vector<double> w(static_cast<size_t>(vocab), (1.0 - p) / (vocab - 1));
  w[static_cast<size_t>(token)] = p;
  return Distribution(std::move(w));
}

}  // namespace

TEST_CASE("ewa_reference: constant trail is a fixed point") {
  std::vector<double> trail{0.3, 0.3, 0.3, 0.3};
  CHECK(ewa_reference(trail, 0.8, 3) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("ewa_reference worked example") {
  // p_t = 0.5, p_{t-1} = 0.3, gamma = 0.8, L = 1: (0.5 + 0.24) / 1.8
  std::vector<double> trail{0.3, 0.5};
  CHECK(std::abs(ewa_reference(trail, 0.8, 1) - 0.74 / 1.8) <= 1e-12);
}

TEST_CASE("ewa_reference: tiny gamma degenerates to the current value") {
  std::vector<double> trail{0.9, 0.1, 0.5};
  CHECK(ewa_reference(trail, 1e-12, 2) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("ewa_reference caps the history depth at L") {
  std::vector<double> trail{0.9, 0.2, 0.4};
  double l1 = ewa_reference(trail, 0.5, 1);
  CHECK(l1 == doctest::Approx((0.4 + 0.5 * 0.2) / 1.5).epsilon(1e-14));
  double l2 = ewa_reference(trail, 0.5, 2);
  CHECK(l2 == doctest::Approx((0.4 + 0.5 * 0.2 + 0.25 * 0.9) / 1.75).epsilon(1e-14));
}

TEST_CASE("ewa_reference history-only variant") {
  std::vector<double> trail{0.2, 0.4, 0.6};
  double ref = ewa_reference(trail, 0.5, 2, /*include_current=*/false);
  CHECK(ref == doctest::Approx((0.5 * 0.4 + 0.25 * 0.2) / 0.75).epsilon(1e-14));
  // no history at all: falls back to the current value
  std::vector<double> only{0.7};
  CHECK(ewa_reference(only, 0.5, 2, false) == doctest::Approx(0.7));
}

TEST_CASE("ewa_reference stays inside the trail's range") {
  SeededRng rng(8);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> trail(1 + rng.next_below(6));
    double lo = 1.0, hi = 0.0;
    for (double& v : trail) {
      v = rng.next_double();
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    double ref = ewa_reference(trail, 0.1 + 0.8 * rng.next_double(), 3);
    CHECK(ref >= lo - 1e-12);
    CHECK(ref <= hi + 1e-12);
  }
}

TEST_CASE("prediction_score basics") {
  CHECK(prediction_score(0.3, 0.3) == doctest::Approx(0.0));
  CHECK(std::abs(prediction_score(0.4, 0.2) - std::log(2.0)) <= 1e-12);
  CHECK(prediction_score(0.0, 0.0) == doctest::Approx(0.0));  // both floored
  CHECK(prediction_score(0.4, 0.2) > 0.0);
  CHECK(prediction_score(0.2, 0.4) < 0.0);
}

TEST_CASE("growth_mask fixtures") {
  CHECK(growth_mask(std::vector<double>{0.1, 0.2, 0.3, 0.4}, 3) == 1);
  CHECK(growth_mask(std::vector<double>{0.2, 0.2, 0.2, 0.2}, 3) == 0);
  CHECK(growth_mask(std::vector<double>{0.1, 0.3, 0.25, 0.4}, 3) == 0);
}

TEST_CASE("growth_mask: insufficient history yields 0") {
  CHECK(growth_mask(std::vector<double>{0.2, 0.4}, 3) == 0);
  CHECK(growth_mask(std::vector<double>{0.4}, 1) == 0);
  CHECK(growth_mask(std::vector<double>{0.2, 0.4}, 1) == 1);
}

TEST_CASE("growth_mask: only the most recent comparisons count") {
  // A dip older than the required window does not break the run; the
  // inclusive reading (one more comparison) sees it.
  std::vector<double> trail{0.5, 0.1, 0.2, 0.3, 0.4};
  CHECK(growth_mask(trail, 3) == 1);
  CHECK(growth_mask(trail, 4) == 0);
}

TEST_CASE("bayesian_fusion: all-zero mask returns the input bit-exactly") {
  Distribution p({0.4, 0.3, 0.2, 0.1});
  std::vector<double> score{1.0, 2.0, 3.0, 4.0};
  std::vector<uint8_t> mask{0, 0, 0, 0};
  std::vector<int> candidates{0, 1, 2, 3};
  Distribution fused = bayesian_fusion(p, score, mask, candidates);
  for (int i = 0; i < 4; ++i) CHECK(fused[i] == p[i]);
}

TEST_CASE("bayesian_fusion worked example") {
  // Masses [0.4, 0.3*2, 0.2, 0.1] renormalize by 1.3.
  Distribution p({0.4, 0.3, 0.2, 0.1});
  std::vector<double> score{0.0, std::log(2.0), 0.0, 0.0};
  std::vector<uint8_t> mask{0, 1, 0, 0};
  std::vector<int> candidates{0, 1};
  Distribution fused = bayesian_fusion(p, score, mask, candidates);
  CHECK(std::abs(fused[0] - 4.0 / 13.0) <= 1e-9);
  CHECK(std::abs(fused[1] - 6.0 / 13.0) <= 1e-9);
  CHECK(std::abs(fused[2] - 2.0 / 13.0) <= 1e-9);
  CHECK(std::abs(fused[3] - 1.0 / 13.0) <= 1e-9);
  // Tokens outside the boosted set strictly shrink under renormalization.
  CHECK(fused[2] < p[2]);
  CHECK(fused[3] < p[3]);
}

TEST_CASE("bayesian_fusion ignores masked tokens outside the candidate set") {
  Distribution p({0.4, 0.3, 0.2, 0.1});
  std::vector<double> score{0.0, std::log(2.0), 5.0, 0.0};
  std::vector<uint8_t> mask{0, 1, 1, 0};
  std::vector<int> candidates{0, 1};  // token 2 masked but not a candidate
  Distribution fused = bayesian_fusion(p, score, mask, candidates);
  CHECK(std::abs(fused[2] - 2.0 / 13.0) <= 1e-9);
}

TEST_CASE("vp config validation") {
  VPConfig ok;
  CHECK_NOTHROW(ok.validate());
  VPConfig bad = ok;
  bad.growth_steps = 4;  // exceeds history_len = 3
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS((VpDrafter{bad}), ConfigError);
  VPConfig g = ok;
  g.gamma = 1.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  CHECK_NOTHROW(g.validate(/*relaxed=*/true));
  VPConfig n0 = ok;
  n0.growth_steps = 0;
  CHECK_THROWS_AS(n0.validate(), ConfigError);
  CHECK_NOTHROW(n0.validate(/*relaxed=*/true));
}

TEST_CASE("history store ring keeps the newest snapshots") {
  HistoryStore store(3);
  for (int k = 0; k < 5; ++k) store.push(7, snapshot_with(4, 0, 0.1 + 0.1 * k));
  CHECK(store.depth(7) == 3);
  auto trail = store.trail(7, 0);
  REQUIRE(trail.size() == 3);
  CHECK(trail[0] == doctest::Approx(0.3));
  CHECK(trail[2] == doctest::Approx(0.5));
  store.erase(7);
  CHECK(store.depth(7) == 0);
  CHECK(store.trail(7, 0).empty());
}

TEST_CASE("vp draft with empty history equals the input distribution exactly") {
  VpDrafter drafter(VPConfig{});
  HistoryStore history(5);
  SeededRng rng(31);
  for (int t = 0; t < 100; ++t) {
    int vocab = 2 + static_cast<int>(rng.next_below(30));
    std::vector<DraftSlot> slots(1 + rng.next_below(6));
    for (size_t k = 0; k < slots.size(); ++k) {
      slots[k].p = random_distribution(rng, vocab);
      slots[k].position = static_cast<long>(100 * t + k);
      slots[k].from_model = true;
    }
    auto drafted = drafter.draft(slots, history, rng, nullptr, 1);
    REQUIRE(drafted.size() == slots.size());
    for (size_t k = 0; k < slots.size(); ++k) {
      for (int i = 0; i < vocab; ++i) CHECK(drafted[k].dist[i] == slots[k].p[i]);
      CHECK(drafted[k].masked == false);
    }
  }
}

TEST_CASE("vp draft boosts a token with consecutive growth") {
  VPConfig cfg;
  cfg.topk_ratio = 0.25;  // single candidate at V = 4
  VpDrafter drafter(cfg);
  HistoryStore history(5);
  long pos = 3;
  history.push(pos, snapshot_with(4, 0, 0.1));
  history.push(pos, snapshot_with(4, 0, 0.2));
  history.push(pos, snapshot_with(4, 0, 0.3));

  std::vector<DraftSlot> slots(1);
  slots[0].p = Distribution({0.4, 0.3, 0.2, 0.1});
  slots[0].position = pos;
  SeededRng rng(2);
  auto drafted = drafter.draft(slots, history, rng, nullptr, 4);
  CHECK(drafted[0].dist[0] > slots[0].p[0]);
  for (int i = 1; i < 4; ++i) CHECK(drafted[0].dist[i] < slots[0].p[i]);
  CHECK(drafter.negative_score_count() == 0);
}

TEST_CASE("vp draft: no boost without enough consecutive growth") {
  VPConfig cfg;
  cfg.topk_ratio = 0.25;
  VpDrafter drafter(cfg);
  HistoryStore history(5);
  long pos = 3;
  history.push(pos, snapshot_with(4, 0, 0.1));
  history.push(pos, snapshot_with(4, 0, 0.35));  // dip before the current value
  history.push(pos, snapshot_with(4, 0, 0.3));

  std::vector<DraftSlot> slots(1);
  slots[0].p = Distribution({0.4, 0.3, 0.2, 0.1});
  slots[0].position = pos;
  SeededRng rng(2);
  auto drafted = drafter.draft(slots, history, rng, nullptr, 4);
  for (int i = 0; i < 4; ++i) CHECK(drafted[0].dist[i] == slots[0].p[i]);
}

TEST_CASE("vp draft fuzz: boost monotonicity, mask soundness, non-negative scores") {
  // Defaults N = L = 3: a firing mask forces the current value above every
  // EWA input, so the score stays non-negative.
  VPConfig cfg;
  cfg.topk_ratio = 0.5;
  VpDrafter drafter(cfg);
  SeededRng rng(555);
  for (int t = 0; t < 500; ++t) {
    int vocab = 4 + static_cast<int>(rng.next_below(12));
    HistoryStore history(cfg.history_len + 2);
    long pos = t;
    int depth = static_cast<int>(rng.next_below(6));
    for (int k = 0; k < depth; ++k) history.push(pos, random_distribution(rng, vocab));

    std::vector<DraftSlot> slots(1);
    slots[0].p = random_distribution(rng, vocab);
    slots[0].position = pos;
    auto drafted = drafter.draft(slots, history, rng, nullptr, depth + 1);

    const Distribution& fused = drafted[0].dist;
    auto cands = top_k_candidates(slots[0].p, cfg.topk_ratio);
    std::vector<int> boosted, plain;
    for (int x = 0; x < vocab; ++x) {
      std::vector<double> trail = history.trail(pos, x);
      trail.push_back(slots[0].p[x]);
      bool hit = std::binary_search(cands.begin(), cands.end(), x) &&
                 growth_mask(trail, cfg.growth_steps) == 1 &&
                 prediction_score(slots[0].p[x],
                                  ewa_reference(trail, cfg.gamma, cfg.history_len)) > 0.0;
      (hit ? boosted : plain).push_back(x);
    }
    // Non-negative scores keep the normalizer >= 1, so unboosted tokens can
    // only lose mass; boosted tokens strictly gain relative to any unboosted
    // one (outright gain can be eaten by a stronger boost elsewhere).
    for (int y : plain) CHECK(fused[y] <= slots[0].p[y] + 1e-15);
    for (int x : boosted) {
      for (int y : plain) {
        if (slots[0].p[y] > 0.0) {
          CHECK(fused[x] * slots[0].p[y] > slots[0].p[x] * fused[y]);
        }
      }
    }
    if (boosted.size() == 1) CHECK(fused[boosted[0]] > slots[0].p[boosted[0]]);
    if (drafted[0].masked) {
      std::vector<double> trail = history.trail(pos, drafted[0].token);
      trail.push_back(slots[0].p[drafted[0].token]);
      CHECK(growth_mask(trail, cfg.growth_steps) == 1);
    }
  }
  CHECK(drafter.negative_score_count() == 0);
}

TEST_CASE("drafting is deterministic under a fixed seed") {
  VpDrafter a(VPConfig{}), b(VPConfig{});
  HistoryStore history(5);
  SeededRng setup(9);
  for (int k = 0; k < 4; ++k) history.push(0, random_distribution(setup, 8));
  std::vector<DraftSlot> slots(3);
  for (size_t k = 0; k < slots.size(); ++k) {
    slots[k].p = random_distribution(setup, 8);
    slots[k].position = static_cast<long>(k);
  }
  SeededRng r1(77), r2(77);
  auto d1 = a.draft(slots, history, r1, nullptr, 5);
  auto d2 = b.draft(slots, history, r2, nullptr, 5);
  for (size_t k = 0; k < slots.size(); ++k) {
    CHECK(d1[k].token == d2[k].token);
    CHECK(d1[k].masked == d2[k].masked);
  }
}

TEST_CASE("sjd drafter samples straight from the slot distribution") {
  SjdDrafter drafter;
  HistoryStore history(5);
  std::vector<DraftSlot> slots(1);
  slots[0].p = Distribution::point_mass(6, 4);
  slots[0].position = 0;
  SeededRng rng(1);
  auto drafted = drafter.draft(slots, history, rng, nullptr, 1);
  CHECK(drafted[0].token == 4);
  CHECK(drafted[0].dist[4] == doctest::Approx(1.0));
  CHECK(drafted[0].masked == false);
}
