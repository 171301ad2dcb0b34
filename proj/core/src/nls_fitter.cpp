#include "scaffold/nls_fitter.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scaffold::nls {
namespace {

using Vec3 = Eigen::Vector3d;

Vec3 to_vec(const irt::IrtParams& p) { return {p.k, p.mu, p.b}; }
irt::IrtParams to_params(const Vec3& v) { return {v[0], v[1], v[2]}; }

Vec3 lower(const FitBounds& b) { return {b.k_min, b.mu_min, b.b_min}; }
Vec3 upper(const FitBounds& b) { return {b.k_max, b.mu_max, b.b_max}; }

void check_observations(std::span<const Observation> observations) {
  if (observations.empty()) {
    throw std::invalid_argument("nls::fit: at least one observation is required");
  }
  for (const auto& o : observations) {
    if (!std::isfinite(o.p) || !std::isfinite(o.a_hat) || !std::isfinite(o.weight)) {
      throw std::invalid_argument("nls::fit: non-finite observation");
    }
    if (o.p < 0.0 || o.p > 1.0 || o.a_hat < 0.0 || o.a_hat > 1.0) {
      throw std::invalid_argument("nls::fit: observation outside [0, 1]");
    }
    if (o.weight <= 0.0) {
      throw std::invalid_argument("nls::fit: observation weight must be positive");
    }
  }
}

double sum_of_squares(const irt::IrtParams& params, std::span<const Observation> observations) {
  double total = 0.0;
  for (const auto& o : observations) {
    const double e = irt::forward(params, o.p) - o.a_hat;
    total += o.weight * e * e;
  }
  return total;
}

}  // namespace

bool FitBounds::contains(const irt::IrtParams& params) const {
  return params.k >= k_min && params.k <= k_max && params.mu >= mu_min && params.mu <= mu_max &&
         params.b >= b_min && params.b <= b_max;
}

irt::IrtParams FitBounds::project(const irt::IrtParams& params) const {
  return {std::clamp(params.k, k_min, k_max), std::clamp(params.mu, mu_min, mu_max),
          std::clamp(params.b, b_min, b_max)};
}

void FitConfig::validate() const {
  const auto& b = bounds;
  for (double v : {b.k_min, b.k_max, b.mu_min, b.mu_max, b.b_min, b.b_max}) {
    if (!std::isfinite(v)) throw std::invalid_argument("FitConfig: bounds must be finite");
  }
  if (b.k_min <= 0.0 || b.k_min > b.k_max) throw std::invalid_argument("FitConfig: bad k bounds");
  if (b.mu_min > b.mu_max) throw std::invalid_argument("FitConfig: bad mu bounds");
  if (b.b_min < 0.0 || b.b_min > b.b_max || b.b_max >= 1.0) {
    throw std::invalid_argument("FitConfig: bad b bounds");
  }
  if (initial && !b.contains(*initial)) {
    throw std::invalid_argument("FitConfig: initial guess outside bounds");
  }
  if (max_iterations < 1) throw std::invalid_argument("FitConfig: max_iterations must be >= 1");
  if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0)) {
    throw std::invalid_argument("FitConfig: tolerances must be positive");
  }
}

irt::IrtParams default_initial_guess(std::span<const Observation> observations,
                                     const FitBounds& bounds) {
  double mean_rate = 0.0;
  double min_acc = 1.0;
  for (const auto& o : observations) {
    mean_rate += o.p;
    min_acc = std::min(min_acc, o.a_hat);
  }
  if (!observations.empty()) mean_rate /= static_cast<double>(observations.size());
  return bounds.project({10.0, -mean_rate, min_acc});
}

ResidualSystem residuals_and_jacobian(const irt::IrtParams& params,
                                      std::span<const Observation> observations) {
  ResidualSystem sys;
  sys.residuals.reserve(observations.size());
  sys.jacobian.reserve(observations.size());
  for (const auto& o : observations) {
    const double sw = std::sqrt(o.weight);
    sys.residuals.push_back(sw * (irt::forward(params, o.p) - o.a_hat));
    const auto g = irt::jacobian(params, o.p);
    sys.jacobian.push_back({sw * g.d_k, sw * g.d_mu, sw * g.d_b});
  }
  return sys;
}

FitResult fit(std::span<const Observation> observations, const FitConfig& config) {
  check_observations(observations);
  config.validate();

  const Vec3 lo = lower(config.bounds);
  const Vec3 hi = upper(config.bounds);
  auto clamp3 = [&](const Vec3& v) -> Vec3 { return v.cwiseMax(lo).cwiseMin(hi); };

  Vec3 x = to_vec(config.initial ? *config.initial
                                 : default_initial_guess(observations, config.bounds));
  x = clamp3(x);

  FitResult result;
  FitReport& report = result.report;
  double cost = sum_of_squares(to_params(x), observations);
  report.cost_history.push_back(cost);
  report.iterates.push_back(to_params(x));

  double lambda = -1.0;
  double nu = 2.0;
  double pg_norm = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const auto sys = residuals_and_jacobian(to_params(x), observations);
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Vec3 g = Vec3::Zero();
    for (std::size_t j = 0; j < sys.residuals.size(); ++j) {
      const Vec3 row(sys.jacobian[j][0], sys.jacobian[j][1], sys.jacobian[j][2]);
      h.noalias() += row * row.transpose();
      g += row * sys.residuals[j];
    }

    // Projected gradient: zero in directions blocked by an active bound.
    const Vec3 pg = x - clamp3(x - g);
    pg_norm = pg.cwiseAbs().maxCoeff();
    if (pg_norm < config.gradient_tolerance) {
      report.converged = true;
      break;
    }
    ++report.iterations;

    if (lambda < 0.0) lambda = 1e-3 * std::max(h.diagonal().maxCoeff(), 1e-12);

    // Freeze variables pinned against a bound by the descent direction.
    std::array<bool, 3> frozen{};
    for (int i = 0; i < 3; ++i) {
      frozen[i] = (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0);
    }
    Eigen::Matrix3d a = h;
    Vec3 rhs = -g;
    for (int i = 0; i < 3; ++i) {
      a(i, i) += lambda * std::max(h(i, i), 1e-12);
    }
    for (int i = 0; i < 3; ++i) {
      if (!frozen[i]) continue;
      a.row(i).setZero();
      a.col(i).setZero();
      a(i, i) = 1.0;
      rhs[i] = 0.0;
    }
    const Vec3 delta = a.ldlt().solve(rhs);
    const Vec3 trial = clamp3(x + delta);
    const Vec3 step = trial - x;

    if (step.norm() < config.step_tolerance) {
      report.converged = true;
      break;
    }

    const double trial_cost = sum_of_squares(to_params(trial), observations);
    // Model and actual reductions of 0.5 * ||r||^2.
    const double predicted = -(g.dot(step) + 0.5 * step.dot(h * step));
    const double actual = 0.5 * (cost - trial_cost);
    const double rho = predicted > 0.0 ? actual / predicted : -1.0;

    if (actual > 0.0 && std::isfinite(trial_cost)) {
      x = trial;
      cost = trial_cost;
      report.cost_history.push_back(cost);
      report.iterates.push_back(to_params(x));
      const double t = 2.0 * rho - 1.0;
      lambda *= std::max(1.0 / 3.0, 1.0 - t * t * t);
      nu = 2.0;
    } else {
      lambda *= nu;
      nu *= 2.0;
    }
  }

  if (!report.converged) {
    // Recompute the stopping statistic at the final iterate.
    const auto sys = residuals_and_jacobian(to_params(x), observations);
    Vec3 g = Vec3::Zero();
    for (std::size_t j = 0; j < sys.residuals.size(); ++j) {
      g += Vec3(sys.jacobian[j][0], sys.jacobian[j][1], sys.jacobian[j][2]) * sys.residuals[j];
    }
    pg_norm = (x - clamp3(x - g)).cwiseAbs().maxCoeff();
    report.converged = pg_norm < config.gradient_tolerance;
  }

  result.params = to_params(x);
  report.residual = cost;
  report.gradient_norm = pg_norm;
  return result;
}

}  // namespace scaffold::nls
