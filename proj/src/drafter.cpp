#include "specjac/drafter.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "specjac/trajectory.hpp"

namespace specjac {

std::string to_string(VerifyMode mode) {
  return mode == VerifyMode::strict ? "strict" : "paper";
}

VerifyMode verify_mode_from_string(const std::string& s) {
  if (s == "strict") return VerifyMode::strict;
  if (s == "paper") return VerifyMode::paper;
  throw ConfigError("unknown verify mode '" + s + "' (expected strict|paper)");
}

void VPConfig::validate(bool relaxed) const {
  if (!(gamma > 0.0)) throw ConfigError("vp.gamma must be positive");
  if (gamma >= 1.0) {
    if (!relaxed || gamma > 1.0) throw ConfigError("vp.gamma must lie in (0, 1)");
    std::cerr << "warning: gamma = 1.0 admitted for sweep only (flat averaging)\n";
  }
  if (history_len < 1) throw ConfigError("vp.history_len must be >= 1");
  if (growth_steps < 1) {
    if (!relaxed || growth_steps < 0) throw ConfigError("vp.growth_steps must be >= 1");
    std::cerr << "warning: growth_steps = 0 admitted for sweep only (mask always on)\n";
  }
  if (growth_steps > history_len) {
    if (!relaxed) throw ConfigError("vp.growth_steps must not exceed vp.history_len");
    std::cerr << "warning: growth_steps > history_len admitted for sweep only\n";
  }
  if (!(topk_ratio > 0.0) || topk_ratio > 1.0) throw ConfigError("vp.topk_ratio must be in (0, 1]");
  if (!(eps > 0.0)) throw ConfigError("vp.eps must be positive");
  if (score_clamp < 0.0) throw ConfigError("vp.score_clamp must be >= 0");
}

double ewa_reference(std::span<const double> trail, double gamma, int history_len,
                     bool include_current) {
  if (trail.empty()) throw std::invalid_argument("ewa_reference: trail must not be empty");
  if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("ewa_reference: gamma out of range");
  int last = static_cast<int>(trail.size()) - 1;
  int depth = std::min(history_len, last);  // past values entering the sum
  if (!include_current && depth == 0) return trail[static_cast<size_t>(last)];

  double num = 0.0;
  double den = 0.0;
  double weight = 1.0;
  int k_begin = include_current ? 0 : 1;
  if (!include_current) weight = gamma;
  for (int k = k_begin; k <= depth; ++k) {
    num += weight * trail[static_cast<size_t>(last - k)];
    den += weight;
    weight *= gamma;
  }
  return num / den;
}

double prediction_score(double p_t, double pbar_t, double eps) {
  return std::log(std::max(p_t, eps)) - std::log(std::max(pbar_t, eps));
}

int growth_mask(std::span<const double> trail, int required_increases) {
  if (required_increases < 0) throw std::invalid_argument("growth_mask: negative requirement");
  int comparisons = static_cast<int>(trail.size()) - 1;
  if (comparisons < required_increases) return 0;
  int last = static_cast<int>(trail.size()) - 1;
  for (int k = 0; k < required_increases; ++k) {
    if (!(trail[static_cast<size_t>(last - k)] > trail[static_cast<size_t>(last - k - 1)])) {
      return 0;
    }
  }
  return 1;
}

Distribution bayesian_fusion(const Distribution& p, std::span<const double> score,
                             std::span<const uint8_t> mask, std::span<const int> candidates) {
  if (static_cast<int>(score.size()) != p.size() || static_cast<int>(mask.size()) != p.size()) {
    throw std::invalid_argument("bayesian_fusion: dimension mismatch");
  }
  bool changed = false;
  std::vector<double> fused(p.values().begin(), p.values().end());
  for (int x : candidates) {
    if (x < 0 || x >= p.size()) throw std::invalid_argument("bayesian_fusion: candidate out of range");
    if (mask[static_cast<size_t>(x)] && score[static_cast<size_t>(x)] != 0.0) {
      fused[static_cast<size_t>(x)] = p[x] * std::exp(score[static_cast<size_t>(x)]);
      changed = true;
    }
  }
  if (!changed) return p;
  return Distribution::from_unnormalized(std::move(fused));
}

std::vector<DraftedToken> SjdDrafter::draft(std::span<const DraftSlot> slots,
                                            const HistoryStore& /*history*/, SeededRng& rng,
                                            TrajectoryLogger* /*log*/, long /*iter*/) {
  std::vector<DraftedToken> out;
  out.reserve(slots.size());
  for (const auto& slot : slots) {
    DraftedToken t;
    t.token = sample(slot.p, rng);
    t.dist = slot.p;
    out.push_back(std::move(t));
  }
  return out;
}

VpDrafter::VpDrafter(VPConfig config, bool relaxed_validation) : config_(config) {
  config_.validate(relaxed_validation);
}

std::vector<DraftedToken> VpDrafter::draft(std::span<const DraftSlot> slots,
                                           const HistoryStore& history, SeededRng& rng,
                                           TrajectoryLogger* log, long iter) {
  std::vector<DraftedToken> out;
  out.reserve(slots.size());
  const int need = required_increases();

  for (const auto& slot : slots) {
    const Distribution& p = slot.p;
    int vocab = p.size();
    std::vector<int> candidates = top_k_candidates(p, config_.topk_ratio);
    std::vector<double> score(static_cast<size_t>(vocab), 0.0);
    std::vector<uint8_t> mask(static_cast<size_t>(vocab), 0);

    for (int x : candidates) {
      std::vector<double> trail = history.trail(slot.position, x);
      trail.push_back(p[x]);
      if (!growth_mask(trail, need)) continue;
      mask[static_cast<size_t>(x)] = 1;
      double pbar = ewa_reference(trail, config_.gamma, config_.history_len,
                                  config_.ewa_includes_current);
      double s = prediction_score(p[x], pbar, config_.eps);
      if (s < 0.0) ++negative_score_count_;
      if (config_.score_clamp > 0.0) s = std::clamp(s, -config_.score_clamp, config_.score_clamp);
      score[static_cast<size_t>(x)] = s;
    }

    Distribution fused = bayesian_fusion(p, score, mask, candidates);
    DraftedToken t;
    t.token = sample(fused, rng);
    t.masked = mask[static_cast<size_t>(t.token)] != 0;
    t.in_candidates = std::binary_search(candidates.begin(), candidates.end(), t.token);
    t.dist = fused;

    if (log && slot.from_model) {
      // Drafted token plus the five strongest candidates, deduplicated.
      // Uniform placeholder slots carry no model probabilities worth logging.
      std::vector<int> report{t.token};
      std::vector<int> by_prob(static_cast<size_t>(vocab));
      for (int i = 0; i < vocab; ++i) by_prob[static_cast<size_t>(i)] = i;
      std::partial_sort(by_prob.begin(), by_prob.begin() + std::min(5, vocab), by_prob.end(),
                        [&](int a, int b) { return p[a] != p[b] ? p[a] > p[b] : a < b; });
      for (int i = 0; i < std::min(5, vocab); ++i) {
        if (by_prob[static_cast<size_t>(i)] != t.token) report.push_back(by_prob[static_cast<size_t>(i)]);
      }
      for (size_t r = 0; r < report.size(); ++r) {
        int x = report[r];
        std::vector<double> trail = history.trail(slot.position, x);
        trail.push_back(p[x]);
        double pbar = ewa_reference(trail, config_.gamma, config_.history_len,
                                    config_.ewa_includes_current);
        bool in_c = std::binary_search(candidates.begin(), candidates.end(), x);
        log->log_draft(iter, slot.position, x, r == 0 ? "drafted" : "cand", pbar,
                       prediction_score(p[x], pbar, config_.eps),
                       growth_mask(trail, need), in_c, p[x], fused[x], trail);
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace specjac
