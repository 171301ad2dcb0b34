#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "scaffold/irt.hpp"

namespace scaffold::nls {

/// One point of the accuracy-vs-rate curve. Repeated evaluations at the same
/// rate are merged by the caller: a_hat is their mean and weight their count.
struct Observation {
  double p = 0.0;
  double a_hat = 0.0;
  double weight = 1.0;
};

struct FitBounds {
  double k_min = 0.5;
  double k_max = 100.0;
  double mu_min = -2.0;
  double mu_max = 1.0;
  double b_min = 0.0;
  double b_max = 0.5;

  bool contains(const irt::IrtParams& params) const;
  irt::IrtParams project(const irt::IrtParams& params) const;
};

struct FitConfig {
  FitBounds bounds;
  // Unset: derived from the data by default_initial_guess().
  std::optional<irt::IrtParams> initial;
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-10;

  /// Throws std::invalid_argument on non-finite or inverted bounds, or an
  /// initial guess outside them.
  void validate() const;
};

struct FitReport {
  // Weighted sum of squared errors at the returned parameters.
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  // Max-norm of the projected gradient at the returned parameters.
  double gradient_norm = 0.0;
  // Sum of squares after each accepted step, starting with the initial guess.
  std::vector<double> cost_history;
  std::vector<irt::IrtParams> iterates;
};

struct FitResult {
  irt::IrtParams params;
  FitReport report;
};

/// k = 10, mu = -(mean observed rate), b = min observed accuracy, projected
/// into the bounds.
irt::IrtParams default_initial_guess(std::span<const Observation> observations,
                                     const FitBounds& bounds);

struct ResidualSystem {
  // residuals[j] = sqrt(w_j) * (f(p_j) - a_hat_j)
  std::vector<double> residuals;
  // rows of sqrt(w_j) * (df/dk, df/dmu, df/db)
  std::vector<std::array<double, 3>> jacobian;
};

ResidualSystem residuals_and_jacobian(const irt::IrtParams& params,
                                      std::span<const Observation> observations);

/// Box-constrained Levenberg-Marquardt fit of the 3PL curve.
///
/// Minimizes sum_j w_j (f(p_j) - a_hat_j)^2 over the FitConfig bounds. Steps
/// are projected onto the box and variables pinned at an active bound are
/// frozen for the step. Only strictly decreasing steps are accepted, and the
/// fit is deterministic. When max_iterations is exhausted the best iterate is
/// returned with `converged == false`.
///
/// Throws std::invalid_argument for an empty observation list, non-finite
/// values, rates or accuracies outside [0, 1], or non-positive weights.
FitResult fit(std::span<const Observation> observations, const FitConfig& config = {});

}  // namespace scaffold::nls
