#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "specjac/analysis.hpp"
#include "specjac/drafter.hpp"
#include "specjac/engine.hpp"
#include "specjac/experiment.hpp"
#include "specjac/markov.hpp"
#include "specjac/prob.hpp"
#include "specjac/theory.hpp"
#include "specjac/trajectory.hpp"

#include <fstream>

namespace py = pybind11;
using namespace specjac;

namespace {

Distribution make_dist(const std::vector<double>& probs) { return Distribution(probs); }

std::vector<double> dist_values(const Distribution& d) {
  return std::vector<double>(d.values().begin(), d.values().end());
}

SpecResult decode_with(const MarkovModel& model, const Prompt& prompt, int window,
                       const std::string& decoder, uint64_t seed, const VPConfig& vp,
                       const std::string& jsonl_path) {
  SeededRng rng(seed);
  std::unique_ptr<Drafter> drafter;
  if (decoder == "sjd") {
    drafter = std::make_unique<SjdDrafter>();
  } else if (decoder == "sjd-vp") {
    drafter = std::make_unique<VpDrafter>(vp);
  } else {
    throw std::invalid_argument("decoder must be sjd or sjd-vp");
  }
  EngineConfig ec;
  ec.verify_mode = vp.verify_mode;
  ec.history_len = std::max(vp.history_len, vp.growth_steps + (vp.growth_inclusive ? 1 : 0));
  ec.accept_eps = vp.eps;
  if (jsonl_path.empty()) {
    return run_speculative_jacobi(model, prompt, window, *drafter, rng, ec);
  }
  std::ofstream out(jsonl_path);
  if (!out) throw std::runtime_error("cannot write " + jsonl_path);
  TrajectoryMeta meta;
  meta.decoder = decoder;
  meta.vocab = model.vocab();
  meta.window = window;
  meta.gamma = vp.gamma;
  meta.history_len = vp.history_len;
  meta.growth_steps = vp.growth_steps;
  meta.growth_inclusive = vp.growth_inclusive;
  meta.verify_mode = to_string(vp.verify_mode);
  TrajectoryLogger logger(out, meta);
  return run_speculative_jacobi(model, prompt, window, *drafter, rng, ec, &logger);
}

}  // namespace

PYBIND11_MODULE(_specjac, m) {
  m.doc() = "speculative Jacobi decoding testbed";

  py::class_<Distribution>(m, "Distribution")
      .def(py::init(&make_dist), py::arg("probs"))
      .def_static("uniform", &Distribution::uniform)
      .def_static("point_mass", &Distribution::point_mass)
      .def_static("from_unnormalized", &Distribution::from_unnormalized)
      .def("__len__", &Distribution::size)
      .def("__getitem__",
           [](const Distribution& d, int i) {
             if (i < 0 || i >= d.size()) throw py::index_error();
             return d[i];
           })
      .def_property_readonly("probs", &dist_values)
      .def("__repr__", [](const Distribution& d) {
        return "Distribution(V=" + std::to_string(d.size()) + ")";
      });

  py::class_<SeededRng>(m, "SeededRng")
      .def(py::init<uint64_t>(), py::arg("seed"))
      .def("next_double", &SeededRng::next_double)
      .def("next_u64", &SeededRng::next_u64)
      .def_static("derive", &SeededRng::derive);

  m.def("softmax", [](const std::vector<double>& logits) { return softmax(LogitVector{logits}); });
  m.def("log_probs",
        [](const Distribution& d, double eps) { return log_probs(d, eps).logits; },
        py::arg("d"), py::arg("eps") = 1e-12);
  m.def("sample", [](const Distribution& d, SeededRng& rng) { return sample(d, rng); });
  m.def("top_k_candidates", &top_k_candidates, py::arg("d"), py::arg("ratio"));
  m.def("tv_distance", &tv_distance);
  m.def("residual_distribution", &residual_distribution, py::arg("q"), py::arg("p"));

  m.def("ewa_reference",
        [](const std::vector<double>& trail, double gamma, int history_len, bool include_current) {
          return ewa_reference(trail, gamma, history_len, include_current);
        },
        py::arg("trail"), py::arg("gamma"), py::arg("history_len"),
        py::arg("include_current") = true);
  m.def("prediction_score", &prediction_score, py::arg("p_t"), py::arg("pbar_t"),
        py::arg("eps") = 1e-12);
  m.def("growth_mask",
        [](const std::vector<double>& trail, int required) { return growth_mask(trail, required); },
        py::arg("trail"), py::arg("required_increases"));
  m.def("bayesian_fusion",
        [](const Distribution& p, const std::vector<double>& score,
           const std::vector<int>& mask_in, const std::vector<int>& candidates) {
          std::vector<uint8_t> mask(mask_in.size());
          for (size_t i = 0; i < mask_in.size(); ++i) mask[i] = mask_in[i] ? 1 : 0;
          return bayesian_fusion(p, score, mask, candidates);
        },
        py::arg("p"), py::arg("score"), py::arg("mask"), py::arg("candidates"));

  py::class_<VPConfig>(m, "VPConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &VPConfig::gamma)
      .def_readwrite("history_len", &VPConfig::history_len)
      .def_readwrite("growth_steps", &VPConfig::growth_steps)
      .def_readwrite("topk_ratio", &VPConfig::topk_ratio)
      .def_readwrite("eps", &VPConfig::eps)
      .def_readwrite("ewa_includes_current", &VPConfig::ewa_includes_current)
      .def_readwrite("growth_inclusive", &VPConfig::growth_inclusive)
      .def_readwrite("score_clamp", &VPConfig::score_clamp)
      .def_property(
          "verify_mode", [](const VPConfig& c) { return to_string(c.verify_mode); },
          [](VPConfig& c, const std::string& s) { c.verify_mode = verify_mode_from_string(s); });

  py::class_<Prompt>(m, "Prompt")
      .def(py::init([](int id, std::vector<int> prefix, int target_len) {
             Prompt p{id, std::move(prefix), target_len};
             p.validate();
             return p;
           }),
           py::arg("id"), py::arg("prefix"), py::arg("target_len"))
      .def_readonly("id", &Prompt::id)
      .def_readonly("prefix", &Prompt::prefix)
      .def_readonly("target_len", &Prompt::target_len);

  py::class_<MarkovModel>(m, "MarkovModel")
      .def_static("build", &MarkovModel::build, py::arg("seed"), py::arg("order"),
                  py::arg("vocab"), py::arg("concentration"), py::arg("attractor_weight") = 0.0)
      .def_static("from_rows", &MarkovModel::from_rows)
      .def_static("load", [](const std::string& p) { return MarkovModel::load(p); })
      .def("save", [](const MarkovModel& m_, const std::string& p) { m_.save(p); })
      .def_property_readonly("order", &MarkovModel::order)
      .def_property_readonly("vocab", &MarkovModel::vocab)
      .def("next_token_distribution",
           [](const MarkovModel& m_, const std::vector<int>& prefix) {
             return m_.next_token_distribution(prefix);
           })
      .def("row", [](const MarkovModel& m_, size_t i) { return m_.row(i); })
      .def_property_readonly("row_count", &MarkovModel::row_count);

  py::class_<ExactSequenceDistribution>(m, "ExactSequenceDistribution")
      .def_readonly("vocab", &ExactSequenceDistribution::vocab)
      .def_readonly("free_len", &ExactSequenceDistribution::free_len)
      .def_readonly("probs", &ExactSequenceDistribution::probs)
      .def("prob_of", [](const ExactSequenceDistribution& e, const std::vector<int>& c) {
        return e.prob_of(c);
      });
  m.def("exact_sequence_distribution", &exact_sequence_distribution);

  py::class_<RunStats>(m, "RunStats")
      .def_readonly("nfe", &RunStats::nfe)
      .def_readonly("generated", &RunStats::generated)
      .def_readonly("iterations", &RunStats::iterations)
      .def_readonly("run_lengths", &RunStats::run_lengths)
      .def_readonly("drafted", &RunStats::drafted)
      .def_readonly("accepted", &RunStats::accepted)
      .def_readonly("corrections", &RunStats::corrections)
      .def_readonly("acceptance_rate", &RunStats::acceptance_rate)
      .def_readonly("fallback_windows", &RunStats::fallback_windows);

  m.def("autoregressive_decode",
        [](const MarkovModel& model, const Prompt& prompt, uint64_t seed) {
          SeededRng rng(seed);
          ArResult r = autoregressive_decode(model, prompt, rng);
          return py::make_tuple(r.tokens, r.nfe);
        },
        py::arg("model"), py::arg("prompt"), py::arg("seed"));
  m.def("run_greedy_jacobi",
        [](const MarkovModel& model, const Prompt& prompt, int window, int max_iters) {
          GreedyJacobiResult r = run_greedy_jacobi(model, prompt, window, max_iters);
          return py::make_tuple(r.tokens, r.stats);
        },
        py::arg("model"), py::arg("prompt"), py::arg("window"), py::arg("max_iters") = 0);
  m.def("run_speculative_jacobi",
        [](const MarkovModel& model, const Prompt& prompt, int window, const std::string& decoder,
           uint64_t seed, const VPConfig& vp, const std::string& jsonl_path) {
          SpecResult r = decode_with(model, prompt, window, decoder, seed, vp, jsonl_path);
          return py::make_tuple(r.tokens, r.stats);
        },
        py::arg("model"), py::arg("prompt"), py::arg("window"), py::arg("decoder"),
        py::arg("seed"), py::arg("vp") = VPConfig{}, py::arg("jsonl_path") = std::string());

  py::class_<PerturbationSpec>(m, "PerturbationSpec")
      .def(py::init([](double m_, std::vector<double> omega, std::vector<int> yhat) {
             return PerturbationSpec{m_, std::move(omega), std::move(yhat)};
           }),
           py::arg("m"), py::arg("omega"), py::arg("yhat"))
      .def_readwrite("m", &PerturbationSpec::m)
      .def_readwrite("omega", &PerturbationSpec::omega)
      .def_readwrite("yhat", &PerturbationSpec::yhat);

  m.def("ideal_direction", [](const Distribution& p, const Distribution& q) {
    IdealDirection d = ideal_direction(p, q);
    return py::make_tuple(d.y, d.ties);
  });
  m.def("direction_accuracy",
        [](const Distribution& p, const Distribution& q, const std::vector<int>& yhat) {
          return direction_accuracy(p, q, yhat);
        });
  m.def("exact_tv_delta", &exact_tv_delta);
  m.def("first_order_tv_delta", &first_order_tv_delta);

  py::class_<DirectionReport>(m, "DirectionReport")
      .def_readonly("Q", &DirectionReport::Q)
      .def_readonly("q_uniform", &DirectionReport::q_uniform)
      .def_readonly("e_omega", &DirectionReport::e_omega)
      .def_readonly("cov", &DirectionReport::cov)
      .def_readonly("tv_before", &DirectionReport::tv_before)
      .def_readonly("tv_after_exact", &DirectionReport::tv_after_exact)
      .def_readonly("tv_after_first_order", &DirectionReport::tv_after_first_order)
      .def_readonly("ties", &DirectionReport::ties)
      .def_readonly("gap_ok", &DirectionReport::gap_ok);
  m.def("decomposition_check", &decomposition_check);
}
