#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scaffold/hint_controller.hpp"
#include "scaffold/nls_fitter.hpp"
#include "scaffold/policy_sim.hpp"
#include "scaffold/rl_core.hpp"

namespace scaffold::harness {

enum class Mode { ControllerOnly, Hinted, GrpoBaseline, TheorySweep, TargetSweep };

std::string to_string(Mode mode);
/// Throws ConfigError for unknown names.
Mode mode_from_string(const std::string& name);

struct ExperimentConfig {
  Mode mode = Mode::ControllerOnly;
  controller::ControllerConfig controller;
  rl::LossConfig loss;
  nls::FitConfig fit;
  std::optional<std::filesystem::path> task_set;
  long steps = 200;
  std::optional<std::uint64_t> seed;
  std::filesystem::path output_dir = "scaffold_out";
  int batch_size = 64;
  double temperature = 1.0;

  // controller-only and target-sweep
  sim::OraclePopulationSpec population;
  // hinted and grpo-baseline without a task set
  sim::ArithmeticFamilySpec family;
  int policy_window = 2;
  int extra_length = 2;  // max_length = longest solution + extra_length
  // target-sweep grid: i / sweep_denominator for i = 2..denominator-2
  int sweep_denominator = 8;
  // theory-sweep
  std::vector<double> theory_grid;
  std::vector<double> theory_betas;

  /// Throws ConfigError when a required field is missing or out of range.
  void validate() const;
};

/// Desk-scale defaults for a mode.
ExperimentConfig default_config(Mode mode);

/// Canonical JSON text; the manifest's config hash is its SHA-256.
std::string config_to_json(const ExperimentConfig& config);
/// Overlays the fields present in `json_text` onto `base`.
ExperimentConfig config_from_json(const std::string& json_text, ExperimentConfig base);

struct RunResult {
  std::filesystem::path output_dir;
  std::vector<std::string> files;  // relative to output_dir, manifest excluded
  std::string config_hash;
};

/// Executes the configured pipeline and writes its artifacts:
///   config.json, metrics.jsonl, trace.jsonl, summary.json, plus
///   tasks_final.jsonl (controller-only, hinted, grpo-baseline),
///   target_sweep.jsonl (target-sweep) or theory_sweep.jsonl (theory-sweep),
///   and manifest.json listing every file with its SHA-256.
/// Output depends only on the configuration (seed included).
RunResult run(const ExperimentConfig& config);

/// Deterministic epoch-wise batching: each epoch is a fresh permutation of
/// the dataset cut into ceil(N / B) consecutive batches.
class BatchSchedule {
 public:
  BatchSchedule(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);
  /// Indices for the next step; `epoch` receives the 0-based epoch.
  std::vector<std::size_t> next(long& epoch);

 private:
  void reshuffle();

  std::size_t size_;
  std::size_t batch_;
  std::uint64_t seed_;
  long epoch_ = -1;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

}  // namespace scaffold::harness
