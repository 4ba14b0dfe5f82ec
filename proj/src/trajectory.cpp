#include "specjac/trajectory.hpp"

#include <json.hpp>

namespace specjac {

using nlohmann::json;

TrajectoryLogger::TrajectoryLogger(std::ostream& out, const TrajectoryMeta& meta) : out_(out) {
  json j{{"type", "meta"},
         {"schema", kSchema},
         {"fingerprint", meta.fingerprint},
         {"decoder", meta.decoder},
         {"vocab", meta.vocab},
         {"window", meta.window},
         {"gamma", meta.gamma},
         {"history_len", meta.history_len},
         {"growth_steps", meta.growth_steps},
         {"growth_inclusive", meta.growth_inclusive},
         {"verify_mode", meta.verify_mode}};
  out_ << j.dump() << '\n';
}

void TrajectoryLogger::begin_run(int run_id, uint64_t seed) {
  run_ = run_id;
  json j{{"type", "run"}, {"run", run_id}, {"seed", seed}};
  out_ << j.dump() << '\n';
}

void TrajectoryLogger::log_verify(long iter, long pos, int token, double prob,
                                  const std::string& status, bool masked, bool in_candidates,
                                  const std::vector<double>& trail, std::optional<int> correction,
                                  std::optional<double> corr_prob) {
  json j{{"type", "ver"},   {"run", run_},     {"iter", iter},   {"pos", pos},
         {"token", token},  {"prob", prob},    {"status", status},
         {"accepted", status == "accepted"},   {"masked", masked},
         {"cand", in_candidates},              {"trail", trail}};
  if (correction) j["correction"] = *correction;
  if (corr_prob) j["corr_prob"] = *corr_prob;
  out_ << j.dump() << '\n';
}

void TrajectoryLogger::log_draft(long iter, long pos, int token, const std::string& role,
                                 double pbar, double score, int mask, bool in_candidates,
                                 double p_before, double p_after,
                                 const std::vector<double>& trail) {
  json j{{"type", "draft"},  {"run", run_},         {"iter", iter},
         {"pos", pos},       {"token", token},      {"role", role},
         {"pbar", pbar},     {"score", score},      {"mask", mask},
         {"in_candidates", in_candidates},          {"p_before", p_before},
         {"p_after", p_after},                      {"trail", trail}};
  out_ << j.dump() << '\n';
}

}  // namespace specjac
