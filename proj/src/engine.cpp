#include "specjac/engine.hpp"

#include <algorithm>
#include <cmath>

namespace specjac {

std::vector<Distribution> jacobi_step(const MarkovModel& model, std::span<const int> prefix,
                                      std::span<const int> window) {
  std::vector<int> ctx(prefix.begin(), prefix.end());
  ctx.reserve(prefix.size() + window.size());
  std::vector<Distribution> out;
  out.reserve(window.size());
  for (size_t i = 0; i < window.size(); ++i) {
    out.push_back(model.next_token_distribution(ctx));
    ctx.push_back(window[i]);
  }
  return out;
}

VerifyOutcome verify_window(const MarkovModel& model, DecodeState& state, SeededRng& rng,
                            VerifyMode mode, double eps) {
  size_t w = state.window.size();
  if (w == 0) throw std::logic_error("verify_window: empty window");
  if (state.window_dists.size() != w || state.window_raw.size() != w) {
    throw std::logic_error("verify_window: window distributions not populated");
  }

  VerifyOutcome out;
  out.fresh = jacobi_step(model, state.prefix, state.window);

  for (size_t i = 0; i < w; ++i) {
    const Distribution& target =
        mode == VerifyMode::strict ? state.window_dists[i] : state.window_raw[i];
    int x = state.window[i];
    double d = target[x];
    if (d <= 0.0) {
      throw std::logic_error("verify_window: drafted token has zero probability under its draft");
    }
    double q = out.fresh[i][x];
    double u = rng.next_double();
    if (u < std::min(1.0, q / std::max(d, eps))) {
      state.prefix.push_back(x);
      ++out.accepted;
      continue;
    }
    Distribution residual = residual_distribution(out.fresh[i], target);
    out.correction = sample(residual, rng);
    state.prefix.push_back(*out.correction);
    break;
  }
  out.consumed = out.accepted + (out.correction ? 1 : 0);
  return out;
}

SpecResult run_speculative_jacobi(const MarkovModel& model, const Prompt& prompt, int window_size,
                                  Drafter& drafter, SeededRng& rng, const EngineConfig& cfg,
                                  TrajectoryLogger* log, int run_id) {
  prompt.validate();
  if (window_size < 1) throw std::invalid_argument("run_speculative_jacobi: window must be >= 1");

  const int target = prompt.target_len;
  HistoryStore history(cfg.history_len + 2);

  DecodeState state;
  state.prefix = prompt.prefix;

  if (log) log->begin_run(run_id, rng.seed());

  auto redraft = [&](const std::vector<Distribution>* fresh, int consumed, long iter) {
    int keep = fresh ? static_cast<int>(fresh->size()) - consumed : 0;
    int w = std::min<long>(window_size, target - state.base_position());
    std::vector<DraftSlot> slots(static_cast<size_t>(w));
    for (int k = 0; k < w; ++k) {
      auto& slot = slots[static_cast<size_t>(k)];
      slot.position = state.base_position() + k;
      if (k < keep) {
        slot.p = (*fresh)[static_cast<size_t>(consumed + k)];
        slot.from_model = true;
      } else {
        slot.p = Distribution::uniform(model.vocab());
        slot.from_model = false;
      }
    }
    auto drafted = drafter.draft(slots, history, rng, log, iter);
    // History updates follow drafting: the drafter sees the pre-push buffer
    // plus the current distribution, per the reference-and-mask definitions.
    // Uniform placeholders never enter a trajectory.
    state.window.clear();
    state.window_dists.clear();
    state.window_raw.clear();
    state.window_masked.clear();
    state.window_cand.clear();
    for (int k = 0; k < w; ++k) {
      const auto& slot = slots[static_cast<size_t>(k)];
      if (slot.from_model) history.push(slot.position, slot.p);
      state.window.push_back(drafted[static_cast<size_t>(k)].token);
      state.window_dists.push_back(std::move(drafted[static_cast<size_t>(k)].dist));
      state.window_raw.push_back(slot.p);
      state.window_masked.push_back(drafted[static_cast<size_t>(k)].masked ? 1 : 0);
      state.window_cand.push_back(drafted[static_cast<size_t>(k)].in_candidates ? 1 : 0);
    }
  };

  redraft(nullptr, 0, 0);

  SpecResult res;
  RunStats& stats = res.stats;
  const long iter_cap = cfg.max_iter_factor * static_cast<long>(target);

  while (state.base_position() < target) {
    ++state.iteration;
    if (state.iteration > iter_cap) {
      throw DecodeAbort("run_speculative_jacobi: iteration safety valve exceeded (" +
                        std::to_string(iter_cap) + ")");
    }
    const long base0 = state.base_position();
    const size_t w = state.window.size();

    VerifyOutcome outcome = verify_window(model, state, rng, cfg.verify_mode, cfg.accept_eps);
    ++stats.nfe;

    if (log) {
      for (size_t i = 0; i < w; ++i) {
        long pos = base0 + static_cast<long>(i);
        int tok = state.window[i];
        double prob = outcome.fresh[i][tok];
        std::vector<double> trail = history.trail(pos, tok);
        trail.push_back(prob);
        std::string status = static_cast<int>(i) < outcome.accepted ? "accepted"
                             : (outcome.correction && static_cast<int>(i) == outcome.accepted)
                                 ? "rejected"
                                 : "unreached";
        if (status == "rejected") {
          log->log_verify(state.iteration, pos, tok, prob, status,
                          state.window_masked[i] != 0, state.window_cand[i] != 0, trail,
                          *outcome.correction, outcome.fresh[i][*outcome.correction]);
        } else {
          log->log_verify(state.iteration, pos, tok, prob, status,
                          state.window_masked[i] != 0, state.window_cand[i] != 0, trail);
        }
      }
    }

    stats.run_lengths.push_back(outcome.accepted);
    stats.accepted += outcome.accepted;
    stats.drafted += static_cast<long>(w);
    if (outcome.correction) ++stats.corrections;
    for (int k = 0; k < outcome.consumed; ++k) history.erase(base0 + k);

    if (state.base_position() >= target) break;
    redraft(&outcome.fresh, outcome.consumed, state.iteration);
  }

  stats.iterations = state.iteration;
  stats.generated = target - static_cast<long>(prompt.prefix.size());
  stats.acceptance_rate =
      stats.drafted > 0 ? static_cast<double>(stats.accepted) / static_cast<double>(stats.drafted)
                        : 0.0;
  res.tokens = std::move(state.prefix);
  return res;
}

namespace {

int argmax_token(const Distribution& d) {
  int best = 0;
  for (int i = 1; i < d.size(); ++i) {
    if (d[i] > d[best]) best = i;
  }
  return best;
}

}  // namespace

GreedyJacobiResult run_greedy_jacobi(const MarkovModel& model, const Prompt& prompt,
                                     int window_size, int max_iters) {
  prompt.validate();
  if (window_size < 1) throw std::invalid_argument("run_greedy_jacobi: window must be >= 1");

  GreedyJacobiResult res;
  res.tokens = prompt.prefix;
  RunStats& stats = res.stats;

  while (static_cast<int>(res.tokens.size()) < prompt.target_len) {
    int w = std::min<int>(window_size, prompt.target_len - static_cast<int>(res.tokens.size()));
    int cap = max_iters > 0 ? max_iters : w + 1;  // w + 1 passes always suffice
    std::vector<int> window(static_cast<size_t>(w), 0);
    bool converged = false;
    for (int it = 0; it < cap; ++it) {
      auto dists = jacobi_step(model, res.tokens, window);
      ++stats.nfe;
      ++stats.iterations;
      std::vector<int> next(static_cast<size_t>(w));
      for (int i = 0; i < w; ++i) next[static_cast<size_t>(i)] = argmax_token(dists[static_cast<size_t>(i)]);
      if (next == window) {
        converged = true;
        break;
      }
      window = std::move(next);
    }
    if (converged) {
      res.tokens.insert(res.tokens.end(), window.begin(), window.end());
    } else {
      // Sequential fallback for this window, flagged.
      ++stats.fallback_windows;
      for (int i = 0; i < w; ++i) {
        const Distribution& d = model.next_token_distribution(res.tokens);
        res.tokens.push_back(argmax_token(d));
        ++stats.nfe;
      }
    }
  }
  stats.generated = prompt.target_len - static_cast<long>(prompt.prefix.size());
  return res;
}

}  // namespace specjac
