// specjac CLI: decode / bench / sweep / analyze / theory-check.
// Exit codes: 0 ok, 2 config error, 3 decode abort (safety valve),
// 4 analysis input error, 1 anything else.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "specjac/analysis.hpp"
#include "specjac/experiment.hpp"
#include "specjac/theory.hpp"
#include "specjac/trajectory.hpp"

using namespace specjac;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string decoder;
  std::string out_dir;
};

ExperimentConfig load_config(const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = parse_config_file(opts.config_path);
  // CLI flags take precedence over file values.
  if (opts.seed) cfg.seeds = {*opts.seed};
  if (!opts.decoder.empty()) cfg.decoder = opts.decoder;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  return cfg;
}

TrajectoryMeta meta_for(const ExperimentConfig& cfg) {
  TrajectoryMeta meta;
  meta.fingerprint = cfg.fingerprint();
  meta.decoder = cfg.decoder;
  meta.vocab = cfg.vocab;
  meta.window = cfg.window;
  meta.gamma = cfg.vp.gamma;
  meta.history_len = cfg.vp.history_len;
  meta.growth_steps = cfg.vp.growth_steps;
  meta.growth_inclusive = cfg.vp.growth_inclusive;
  meta.verify_mode = to_string(cfg.vp.verify_mode);
  return meta;
}

int cmd_decode(const CommonOpts& opts, const std::string& jsonl_path,
               const std::string& save_model) {
  ExperimentConfig cfg = load_config(opts);
  cfg.validate();
  MarkovModel model = cfg.build_model();
  if (!save_model.empty()) {
    model.save(save_model);
    std::cout << "model table written to " << save_model << "\n";
  }
  Prompt prompt = cfg.build_prompts().front();
  uint64_t seed = cfg.seeds.front();

  std::unique_ptr<std::ofstream> jsonl_out;
  std::unique_ptr<TrajectoryLogger> logger;
  if (!jsonl_path.empty() && (cfg.decoder == "sjd" || cfg.decoder == "sjd-vp")) {
    jsonl_out = std::make_unique<std::ofstream>(jsonl_path);
    if (!*jsonl_out) throw std::runtime_error("cannot write " + jsonl_path);
    logger = std::make_unique<TrajectoryLogger>(*jsonl_out, meta_for(cfg));
  }

  SpecResult res = run_single(cfg, model, prompt, seed, logger.get(), 0);
  std::cout << "decoder=" << cfg.decoder << " seed=" << seed << " prompt=" << prompt.id << "\n";
  std::cout << "tokens:";
  for (int t : res.tokens) std::cout << ' ' << t;
  std::cout << "\nnfe=" << res.stats.nfe << " iterations=" << res.stats.iterations
            << " generated=" << res.stats.generated
            << " acceptance_rate=" << res.stats.acceptance_rate
            << " corrections=" << res.stats.corrections << "\n";
  if (logger) std::cout << "trajectory log: " << jsonl_path << "\n";
  return 0;
}

int cmd_bench(const CommonOpts& opts, bool jsonl) {
  ExperimentConfig cfg = load_config(opts);
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();
  std::optional<std::filesystem::path> jsonl_dir;
  if (jsonl) jsonl_dir = std::filesystem::path(cfg.out_dir);
  ComparisonReport report = run_experiment(cfg, jsonl_dir);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_report_files(cfg, report, cfg.out_dir);
  // Wall time and the drafter overhead probe live in their own artifact so
  // the report files stay byte-deterministic.
  OverheadReport probe = overhead_probe(cfg);
  write_timing_json(std::filesystem::path(cfg.out_dir) / "timing.json", probe, wall,
                    report.fingerprint);
  std::cout << format_report_table(report);
  std::cout << "artifacts in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& knob, const std::string& values_str) {
  ExperimentConfig cfg = load_config(opts);
  std::vector<double> values;
  std::istringstream in(values_str);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  auto rows = ablation_sweep(cfg, knob, values);
  std::filesystem::create_directories(cfg.out_dir);
  auto path = std::filesystem::path(cfg.out_dir) / ("sweep_" + knob + ".csv");
  write_sweep_csv(path, rows, cfg.fingerprint());
  std::cout << "sweep rows: " << rows.size() << " -> " << path.string() << "\n";
  return 0;
}

int cmd_analyze(const std::vector<std::string>& jsonl_paths, const std::string& out_dir,
                int n_steps) {
  std::vector<std::filesystem::path> paths(jsonl_paths.begin(), jsonl_paths.end());
  TrajectoryLog log = load_trajectory_log(paths);
  int n = n_steps > 0 ? n_steps : log.meta.growth_steps;
  AnalysisSummary summary = analyze(log, n, {1, 2, 3, 4});
  std::filesystem::create_directories(out_dir);
  write_summary_json(std::filesystem::path(out_dir) / "analysis.json", summary);
  write_summary_csv(std::filesystem::path(out_dir) / "analysis.csv", summary);

  std::cout << "records=" << log.records.size() << " accepted=" << summary.growth.accepted_total
            << "\n";
  if (summary.growth.fraction) {
    std::cout << "growth fraction (n=" << n << "): " << *summary.growth.fraction << " ("
              << summary.growth.growing << "/" << summary.growth.eligible << ", excluded "
              << summary.growth.excluded << ")\n";
  } else {
    std::cout << "growth fraction (n=" << n << "): no eligible accepted tokens\n";
  }
  std::cout << "mask check: " << summary.mask_check.mismatches << " mismatches over "
            << summary.mask_check.records << " records\n";
  std::cout << "summary in " << out_dir << "\n";
  return 0;
}

int cmd_theory(uint64_t seed, int trials, int vocab, double m, const std::string& q_list,
               bool omega_random, long taylor_trials, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto csv_path = std::filesystem::path(out_dir) / "theory_trials.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
  csv << "q_target,trial,Q,e_omega,cov,tv_before,delta_exact,delta_fo,residual,gap_ok,ties\n";

  std::istringstream qs(q_list);
  std::string item;
  while (std::getline(qs, item, ',')) {
    if (item.empty()) continue;
    double q_target = std::stod(item);
    auto rows = run_direction_trials(seed, trials, vocab, m, q_target, !omega_random);
    long gap_ok = 0, reduced = 0;
    for (const auto& r : rows) {
      csv << q_target << ',' << r.trial << ',' << r.Q << ',' << r.e_omega << ',' << r.cov << ','
          << r.tv_before << ',' << r.delta_exact << ',' << r.delta_fo << ',' << r.residual << ','
          << (r.gap_ok ? 1 : 0) << ',' << r.ties << '\n';
      if (r.gap_ok) {
        ++gap_ok;
        if (r.delta_exact < 0.0) ++reduced;
      }
    }
    std::cout << "Q target " << q_target << ": " << reduced << "/" << gap_ok
              << " gap-ok trials reduced TV\n";
  }

  TaylorScalingReport taylor = taylor_remainder_scaling(seed, taylor_trials, vocab, m);
  std::cout << "taylor remainder: mean |exact-fo| " << taylor.mean_abs_remainder_full << " at m, "
            << taylor.mean_abs_remainder_half << " at m/2, ratio " << taylor.ratio << " ("
            << taylor.crossing_trials_full << "/" << taylor.trials << " trials crossed a gap)\n";
  std::cout << "per-trial CSV: " << csv_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speculative Jacobi decoding testbed"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string jsonl_path, save_model;
  bool bench_jsonl = false;
  std::string knob, values_str;
  std::vector<std::string> analyze_inputs;
  std::string analyze_out = "out";
  int n_steps = 0;
  uint64_t theory_seed = 20240901;
  int theory_trials = 1000;
  int theory_vocab = 32;
  double theory_m = 1e-3;
  std::string theory_q = "0.6,0.8,0.95";
  bool theory_omega_random = false;
  long taylor_trials = 10000;
  std::string theory_out = "out";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "flat key=value config file");
    sub->add_option("--seed", opts.seed, "override: run only this seed");
    sub->add_option("--decoder", opts.decoder, "override decoder (ar|jacobi|sjd|sjd-vp)");
    sub->add_option("--out", opts.out_dir, "output directory");
  };

  auto* decode = app.add_subcommand("decode", "single decode run");
  add_common(decode);
  decode->add_option("--jsonl", jsonl_path, "write the trajectory log to this file");
  decode->add_option("--save-model", save_model, "dump the model table to this file");

  auto* bench = app.add_subcommand("bench", "seed sweep comparing decoders");
  add_common(bench);
  bench->add_flag("--jsonl", bench_jsonl, "also write per-decoder trajectory logs");

  auto* sweep = app.add_subcommand("sweep", "ablation over one knob");
  add_common(sweep);
  sweep->add_option("--knob", knob, "gamma|L|N|topk_ratio|W")->required();
  sweep->add_option("--values", values_str, "comma-separated values")->required();

  auto* analyze_cmd = app.add_subcommand("analyze", "trajectory-log statistics");
  analyze_cmd->add_option("--jsonl", analyze_inputs, "trajectory files")->required();
  analyze_cmd->add_option("--out", analyze_out, "output directory");
  analyze_cmd->add_option("--n-steps", n_steps, "growth window (default: growth_steps from log)");

  auto* theory = app.add_subcommand("theory-check", "TV perturbation trials");
  theory->add_option("--seed", theory_seed, "trial seed");
  theory->add_option("--trials", theory_trials, "trials per accuracy target");
  theory->add_option("--vocab", theory_vocab, "vocabulary size");
  theory->add_option("--m", theory_m, "perturbation magnitude");
  theory->add_option("--q", theory_q, "comma-separated accuracy targets");
  theory->add_flag("--omega-random", theory_omega_random, "random weights instead of constant");
  theory->add_option("--taylor-trials", taylor_trials, "trials for the remainder scaling probe");
  theory->add_option("--out", theory_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*decode) return cmd_decode(opts, jsonl_path, save_model);
    if (*bench) return cmd_bench(opts, bench_jsonl);
    if (*sweep) return cmd_sweep(opts, knob, values_str);
    if (*analyze_cmd) return cmd_analyze(analyze_inputs, analyze_out, n_steps);
    if (*theory) return cmd_theory(theory_seed, theory_trials, theory_vocab, theory_m, theory_q,
                                   theory_omega_random, taylor_trials, theory_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DecodeAbort& e) {
    std::cerr << "decode aborted: " << e.what() << "\n";
    return 3;
  } catch (const AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
