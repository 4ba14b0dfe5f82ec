#pragma once

// Reproducible experiment driver: build a model from a flat key=value
// config, run seed sweeps across decoders, compare NFE, and expose the
// ablation and overhead probes. All artifacts embed the config fingerprint;
// everything except wall-clock timing is byte-deterministic.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "specjac/drafter.hpp"
#include "specjac/engine.hpp"
#include "specjac/markov.hpp"

namespace specjac {

struct ExperimentConfig {
  // model
  uint64_t model_seed = 7;
  int order = 1;
  int vocab = 64;
  double concentration = 0.5;
  double attractor_weight = 0.3;
  std::string model_file;  // when set, load the table instead of building

  // prompts
  uint64_t prompts_seed = 1;
  int prompt_count = 200;
  int prefix_len = 1;
  int target_len = 128;

  // decoding
  std::string decoder = "sjd-vp";                            // single-run choice
  std::vector<std::string> decoders = {"ar", "jacobi", "sjd", "sjd-vp"};
  int window = 16;
  long max_iter_factor = 16;
  VPConfig vp;

  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string out_dir = "out";

  void validate(bool relaxed = false) const;
  // Canonical sorted key=value rendering; the fingerprint hashes it.
  std::string canonical() const;
  std::string fingerprint() const;

  MarkovModel build_model() const;
  std::vector<Prompt> build_prompts() const;
  EngineConfig engine_config() const;
};

/// Flat key=value file ('#' comments). Unknown keys fail fast.
ExperimentConfig parse_config_file(const std::filesystem::path& path);
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct SeedRow {
  std::string decoder;
  uint64_t seed = 0;
  double mean_nfe = 0.0;
  double acceptance_rate = 0.0;  // 0 for decoders without verification
  double mean_run_length = 0.0;
  long generated = 0;
  long corrections = 0;
};

struct DecoderAggregate {
  std::string decoder;
  double mean_nfe = 0.0;
  double nfe_accel_vs_ar = 0.0;  // mean NFE(ar) / mean NFE(decoder)
  double acceptance_rate = 0.0;
  double mean_run_length = 0.0;
  long generated = 0;
};

struct ComparisonReport {
  std::string fingerprint;
  std::vector<DecoderAggregate> aggregates;
  std::vector<SeedRow> rows;
};

/// Runs every configured decoder over seeds x prompts. Deterministic given
/// the config; pairs decoders by deriving each run's RNG from (seed, prompt)
/// only. When jsonl_dir is set, one trajectory file per decoder is written
/// there. `relaxed` admits sweep boundary values.
ComparisonReport run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& jsonl_dir = {},
                                bool relaxed = false);

/// One decode with the configured single-run decoder; optional trajectory log.
SpecResult run_single(const ExperimentConfig& cfg, const MarkovModel& model, const Prompt& prompt,
                      uint64_t seed, TrajectoryLogger* log = nullptr, int run_id = 0,
                      bool relaxed = false);

std::string format_report_table(const ComparisonReport& report);
void write_report_files(const ExperimentConfig& cfg, const ComparisonReport& report,
                        const std::filesystem::path& out_dir);

struct SweepRow {
  std::string knob;
  double value = 0.0;
  DecoderAggregate aggregate;
};

/// One run_experiment per value, all other knobs at their configured
/// defaults. Knobs: gamma, L, N, topk_ratio, W.
std::vector<SweepRow> ablation_sweep(const ExperimentConfig& cfg, const std::string& knob,
                                     const std::vector<double>& values);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows,
                     const std::string& fingerprint);

struct OverheadReport {
  double sjd_ns_per_slot = 0.0;
  double vp_ns_per_slot = 0.0;
  double ratio = 0.0;  // vp / sjd
  long slots_timed = 0;
};

/// Wall-time probe of drafting cost, baseline sampling vs the
/// verification-prediction path on identical slot batches. Timing lives in
/// its own artifact; nothing deterministic depends on it.
OverheadReport overhead_probe(const ExperimentConfig& cfg, int batches = 24,
                              int slots_per_batch = 256);

void write_timing_json(const std::filesystem::path& path, const OverheadReport& probe,
                       double wall_seconds, const std::string& fingerprint);

}  // namespace specjac
