#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scaffold/policy_sim.hpp"

namespace scaffold::theory {

// Numerical check of the loss-descent envelope
//
//   L(theta_old) - L(theta_old + d*) <= a (1 - a) / (2 beta)
//
// for L(theta) = -(a_theta - a_old) + beta KL(pi_old || pi_theta), with d*
// the natural-gradient minimizer of the quadratic model. Every expectation is
// computed by enumerating the policy's responses.

using RewardFn = std::function<double(std::span<const int>)>;

/// Flat logit indices (TabularPolicy::parameter_index) treated as free
/// parameters; all other logits stay fixed.
using ParameterSelection = std::vector<std::size_t>;

/// Every logit of every state reachable from the prompt.
ParameterSelection reachable_parameters(const sim::TabularPolicy& policy,
                                        std::span<const int> prompt,
                                        std::size_t cap = sim::kDefaultEnumerationCap);

struct FisherResult {
  Eigen::MatrixXd matrix;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  // max eigenvalue below kDegenerateEigenvalue
  bool degenerate = false;
};

inline constexpr double kDegenerateEigenvalue = 1e-12;

/// F = E_y[score score^T] over the selected logits, by full enumeration.
/// Throws std::length_error when the response space exceeds `cap`.
FisherResult fisher_matrix(const sim::TabularPolicy& policy, std::span<const int> prompt,
                           const ParameterSelection& selection,
                           std::size_t cap = sim::kDefaultEnumerationCap);

struct AccuracyGradient {
  double accuracy = 0.0;
  Eigen::VectorXd gradient;  // d a / d theta_selected = E[r * score]
};

AccuracyGradient accuracy_gradient(const sim::TabularPolicy& policy, std::span<const int> prompt,
                                   const RewardFn& reward, const ParameterSelection& selection,
                                   std::size_t cap = sim::kDefaultEnumerationCap);

struct NaturalStep {
  Eigen::VectorXd step;               // d* = (1/beta) F^+ grad a
  Eigen::VectorXd accuracy_gradient;  // grad a = -grad L_policy
  double accuracy = 0.0;
  // (1 / 2 beta) grad a^T F^+ grad a: descent predicted by the quadratic model.
  double quadratic_descent = 0.0;
  int rank = 0;
  bool degenerate = false;  // F rank-deficient on the selection
};

/// d* = -(1/beta) F^+ grad L_policy with grad L_policy = -grad a. Uses the
/// pseudo-inverse on rank-deficient F. Throws NumericalError when F
/// vanishes entirely while grad a does not.
NaturalStep natural_gradient_step(const sim::TabularPolicy& policy, std::span<const int> prompt,
                                  const RewardFn& reward, double beta,
                                  const ParameterSelection& selection,
                                  std::size_t cap = sim::kDefaultEnumerationCap);

/// a (1 - a) / (2 beta).
double efficiency_bound(double accuracy, double beta);

/// Relative slack granted to the realized descent in the small-step regime,
/// where the second-order model holds to O(|d*|).
inline constexpr double kTaylorRelativeTolerance = 0.05;
/// Steps longer than this are outside the small-step regime; the bound is
/// reported but not asserted.
inline constexpr double kSmallStepNorm = 0.1;

double taylor_tolerance(double bound);

struct BoundReport {
  double accuracy = 0.0;
  double realized_descent = 0.0;
  double bound = 0.0;
  double gap = 0.0;  // bound - realized_descent
  double quadratic_descent = 0.0;
  double step_norm = 0.0;
  double tolerance = 0.0;
  bool degenerate_fisher = false;
  bool large_step = false;    // |d*| > kSmallStepNorm
  bool within_bound = false;  // realized <= bound + tolerance
};

/// Applies d* and re-evaluates the loss exactly (reference = old policy).
/// Throws NumericalError on a non-finite loss.
BoundReport verify_bound(const sim::TabularPolicy& policy, std::span<const int> prompt,
                         const RewardFn& reward, double beta, const ParameterSelection& selection,
                         std::size_t cap = sim::kDefaultEnumerationCap);

/// A one-logit, two-action policy: action 1 succeeds with probability a.
struct Instance {
  sim::TabularPolicy policy;
  std::vector<int> prompt;
  RewardFn reward;
  ParameterSelection selection;
};

Instance bernoulli_instance(double accuracy);
/// Same policy with a reward that is always 0.
Instance zero_reward_instance(double success_probability);

enum class SweepFamily { Bernoulli, ZeroReward };

struct SweepRow {
  double accuracy = 0.0;
  double realized = 0.0;
  double bound = 0.0;
  double quadratic = 0.0;
  double step_norm = 0.0;
};

std::vector<SweepRow> descent_vs_accuracy_sweep(std::span<const double> grid, double beta,
                                                SweepFamily family = SweepFamily::Bernoulli);

}  // namespace scaffold::theory
