#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scaffold/irt.hpp"
#include "scaffold/nls_fitter.hpp"

namespace scaffold::controller {

/// A training instance: prompt, tokenized reference solution and the hinting
/// rate carried over from the previous epoch.
struct Problem {
  std::string id;
  std::vector<int> prompt;
  std::vector<int> solution;
  // End index (exclusive) of every solution step, strictly increasing, <= |solution|.
  std::vector<std::size_t> step_boundaries;
  std::optional<double> persisted_rate;
};

struct ControllerConfig {
  int rounds = 4;              // m
  int rollouts_per_round = 8;  // n
  double target_accuracy = 0.5;
  bool epoch_persistence = true;

  /// Throws ConfigError when m < 1, n < 1 or the target is outside (0, 1).
  void validate() const;
};

struct MemoryEntry {
  double rate = 0.0;
  double accuracy = 0.0;
};

/// Per-problem record of (rate, accuracy) pairs observed during one step.
struct HintAccuracyMemory {
  std::vector<MemoryEntry> entries;
  std::optional<double> persisted_rate;
};

struct HintPlan {
  std::string problem_id;
  double rate = 0.0;
  std::size_t hint_length = 0;
  int round = 0;  // 1-based
  std::vector<int> hint;
};

/// Round-1 rate: the persisted rate when persistence is on and one exists,
/// otherwise (|y| - 1) / |y|. Throws DataError for an empty solution.
double cold_start_rate(std::size_t solution_length, const HintAccuracyMemory& memory,
                       bool epoch_persistence = true);

/// Merges entries with bit-identical rates (mean accuracy, weight = count) and
/// then adds the (0, 0) and (1, 1) margin points for rates not yet evaluated.
/// The result is sorted by rate.
std::vector<nls::Observation> augment_with_margins(const HintAccuracyMemory& memory);

struct RatePrediction {
  double rate = 0.0;
  std::optional<irt::IrtParams> params;
  bool clamped = false;
  bool unreachable = false;
  bool fit_converged = false;
  // The fit failed and the rate came from the fallback chain.
  bool fallback = false;
};

/// Fits the 3PL curve on the augmented memory and inverts it at the target.
/// On fitter failure falls back to the last rate in memory, then to the
/// cold-start default for `solution_length`.
RatePrediction next_rate(const HintAccuracyMemory& memory, const ControllerConfig& config,
                         const nls::FitConfig& fit_config, std::size_t solution_length);

/// l = round_half_up(rate * |y|); the hint is the first l solution tokens.
HintPlan build_hint_plan(const Problem& problem, double rate, int round);

/// Appends (rate, mean(rewards)) and returns the round accuracy.
/// Throws std::invalid_argument on empty or non-binary rewards.
double record_round(HintAccuracyMemory& memory, double rate, std::span<const int> rewards);

/// Returns the rate of the last round (or nothing when persistence is off),
/// stores it in the memory and clears the entries for the next step.
std::optional<double> finalize_step(HintAccuracyMemory& memory, bool epoch_persistence = true);

/// One row of the per-round controller trace.
struct TraceRecord {
  long step = 0;
  std::string problem_id;
  int round = 0;
  double rate = 0.0;
  std::size_t hint_length = 0;
  std::optional<irt::IrtParams> params;
  double accuracy = 0.0;
  bool clamped = false;
  bool unreachable = false;
  bool fallback = false;
};

/// Produces the binary rewards of one round for a plan.
using RoundSampler = std::function<std::vector<int>(const HintPlan&)>;

struct StepOutcome {
  std::vector<HintPlan> plans;
  std::vector<double> accuracies;
  std::vector<TraceRecord> trace;
  std::optional<double> persisted_rate;
};

/// Runs the m sequential rounds of one step for one problem: cold start,
/// then fit -> invert -> sample -> record for rounds 2..m, then finalize.
/// Updates problem.persisted_rate.
StepOutcome run_rounds(Problem& problem, const ControllerConfig& config,
                       const nls::FitConfig& fit_config, long step, const RoundSampler& sampler);

}  // namespace scaffold::controller
