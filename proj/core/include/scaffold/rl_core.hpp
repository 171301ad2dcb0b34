#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scaffold/hint_controller.hpp"
#include "scaffold/nls_fitter.hpp"
#include "scaffold/policy_sim.hpp"

namespace scaffold::rl {

enum class ImitationForm {
  LogLikelihood,  // gamma * log pi(hint | x)
  Probability,    // gamma * pi(hint | x), the literal written form
};

struct LossConfig {
  double beta = 0.001;   // KL coefficient
  double gamma = 0.001;  // hint imitation coefficient
  double epsilon = 0.2;  // ratio clip half-width
  int iterations = 1;    // gradient iterations per step (u)
  double learning_rate = 0.1;
  ImitationForm imitation = ImitationForm::LogLikelihood;

  /// Throws ConfigError on negative coefficients, epsilon outside (0, 1),
  /// u < 1 or a non-positive learning rate.
  void validate() const;
};

/// Dr.GRPO advantages: reward minus the group mean, no std normalization.
std::vector<double> advantages(std::span<const int> rewards);

/// Pools every rollout of a group (all rounds of one problem), computes the
/// advantages and writes them to the generated token positions. Hint
/// positions are left at zero.
void assign_advantages(sim::RolloutBatch& batch);

struct LossValue {
  double total = 0.0;
  double policy = 0.0;
  double kl = 0.0;
  double imitation = 0.0;
  // d total / d logits, laid out like TabularPolicy::parameters().
  std::vector<double> gradient;
};

/// Clipped surrogate with hint imitation and KL to the reference policy:
///
///   L = -(1/P) sum_x (1/|G_x|) sum_{o in G_x} [ sum_{t generated} min(rho_t A_t, clip(rho_t) A_t)
///                                                + gamma * log pi(hint_o | x) ]
///       + beta (1/P) sum_x KL(pi_ref(.|x) || pi(.|x))
///
/// with rho_t = pi(o_t | s_t) / pi_old(o_t | s_t). Hint positions only enter
/// through the imitation term. The gradient is exact in the logits.
/// Throws std::out_of_range for tokens outside the vocabulary.
LossValue surrogate_loss(const sim::RolloutBatch& batch, const sim::TabularPolicy& policy,
                         const sim::PolicySnapshot& old, const sim::PolicySnapshot& ref,
                         const LossConfig& config);

struct KlValue {
  double value = 0.0;
  std::vector<double> gradient;  // with respect to the logits of `policy`
};

/// Exact KL(pi_ref || pi) over responses, summed over prompts. Computed as
/// the ref-visitation-weighted sum of per-state KLs, which equals the
/// sequence-level divergence.
KlValue kl_divergence_with_gradient(const sim::PolicySnapshot& ref,
                                    const sim::TabularPolicy& policy,
                                    std::span<const std::vector<int>> prompts);

double kl_divergence(const sim::PolicySnapshot& ref, const sim::TabularPolicy& policy,
                     std::span<const std::vector<int>> prompts);

enum class TrainingMode { Hinted, GrpoBaseline };

struct StepMetrics {
  long step = 0;
  double reward_mean = 0.0;
  double length_mean = 0.0;  // generated tokens per rollout, terminator excluded
  double loss_policy = 0.0;
  double loss_kl = 0.0;
  double loss_imitation = 0.0;
  double loss_total = 0.0;
  double hint_rate_mean = 0.0;
};

struct TrainSettings {
  TrainingMode mode = TrainingMode::Hinted;
  controller::ControllerConfig controller;
  nls::FitConfig fit;
  LossConfig loss;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

struct TrainStepResult {
  StepMetrics metrics;
  std::vector<controller::TraceRecord> trace;
  std::size_t rollouts = 0;
};

/// One optimization step over a batch of problems (indices into `problems`).
///
/// Hinted: m controller rounds of n rollouts per problem from a frozen copy
/// of the policy. GrpoBaseline: the same m*n rollouts without hints. Then u
/// gradient iterations with the fixed learning rate. Persisted rates in
/// `problems` are updated. Throws NumericalError when the loss is not finite.
TrainStepResult train_step(std::vector<controller::Problem>& problems,
                           std::span<const std::size_t> batch, sim::TabularPolicy& policy,
                           const sim::PolicySnapshot& ref, const TrainSettings& settings,
                           long step);

}  // namespace scaffold::rl
