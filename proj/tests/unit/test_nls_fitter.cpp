#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "finite_difference.hpp"
#include "scaffold/nls_fitter.hpp"
#include "scaffold/random.hpp"

namespace irt = scaffold::irt;
namespace nls = scaffold::nls;
using nls::Observation;

namespace {

std::vector<Observation> noiseless(const irt::IrtParams& truth, std::vector<double> rates) {
  std::vector<Observation> obs;
  for (double p : rates) obs.push_back({p, irt::forward(truth, p), 1.0});
  return obs;
}

}  // namespace

TEST(NlsFit, RecoversNoiselessCurve) {
  const irt::IrtParams truth{8.0, -0.5, 0.1};
  const auto obs = noiseless(truth, {0.0, 0.25, 0.5, 0.75, 1.0});
  const auto res = nls::fit(obs);
  EXPECT_TRUE(res.report.converged);
  EXPECT_NEAR(res.params.k, truth.k, 1e-4);
  EXPECT_NEAR(res.params.mu, truth.mu, 1e-4);
  EXPECT_NEAR(res.params.b, truth.b, 1e-4);
  EXPECT_LT(res.report.residual, 1e-10);
  EXPECT_LE(res.report.iterations, 100);
}

TEST(NlsFit, TwoMarginPointsInterpolateMonotonically) {
  const std::vector<Observation> obs{{0.0, 0.0, 1.0}, {1.0, 1.0, 1.0}};
  const auto res = nls::fit(obs);
  EXPECT_LT(irt::forward(res.params, 0.0), 0.05);
  EXPECT_GT(irt::forward(res.params, 1.0), 0.95);
  const double mid = irt::forward(res.params, 0.5);
  EXPECT_GT(mid, 0.1);
  EXPECT_LT(mid, 0.9);
}

TEST(NlsFit, NoisyObservationsTrackTheCurve) {
  // Monte-Carlo oracle: 5 rates, 8 Bernoulli samples each.
  const irt::IrtParams truth{10.0, -0.6, 0.0};
  const std::vector<double> rates{0.0, 0.25, 0.5, 0.75, 1.0};
  int good = 0;
  const int trials = 500;
  for (int trial = 0; trial < trials; ++trial) {
    scaffold::Rng rng = scaffold::make_stream(21, {static_cast<std::uint64_t>(trial)});
    std::vector<Observation> obs;
    for (double p : rates) {
      int hits = 0;
      for (int j = 0; j < 8; ++j) hits += scaffold::uniform01(rng) < irt::forward(truth, p);
      obs.push_back({p, hits / 8.0, 1.0});
    }
    const auto res = nls::fit(obs);
    double worst = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double p = i / 10.0;
      worst = std::max(worst, std::abs(irt::forward(res.params, p) - irt::forward(truth, p)));
    }
    good += worst <= 0.15;
  }
  EXPECT_GE(good, static_cast<int>(0.95 * trials));
}

TEST(NlsFit, NoisyFitReachesMultiStartOptimum) {
  const irt::IrtParams truth{10.0, -0.6, 0.0};
  const std::vector<double> rates{0.0, 0.25, 0.5, 0.75, 1.0};
  int optimal = 0;
  const int trials = 500;
  for (int trial = 0; trial < trials; ++trial) {
    scaffold::Rng rng = scaffold::make_stream(21, {static_cast<std::uint64_t>(trial)});
    std::vector<Observation> obs;
    for (double p : rates) {
      int hits = 0;
      for (int j = 0; j < 8; ++j) hits += scaffold::uniform01(rng) < irt::forward(truth, p);
      obs.push_back({p, hits / 8.0, 1.0});
    }
    const auto res = nls::fit(obs);
    double best = res.report.residual;
    for (double k : {2.0, 5.0, 20.0, 50.0, 90.0}) {
      for (double mu : {-1.5, -0.8, -0.5, -0.2}) {
        for (double b : {0.0, 0.2, 0.4}) {
          nls::FitConfig config;
          config.initial = irt::IrtParams{k, mu, b};
          config.max_iterations = 1000;
          best = std::min(best, nls::fit(obs, config).report.residual);
        }
      }
    }
    optimal += res.report.residual <= best + 1e-6;
  }
  EXPECT_GE(optimal, static_cast<int>(0.98 * trials));
}

TEST(NlsFit, ExactRecoveryProperty) {
  scaffold::Rng rng(22);
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * scaffold::uniform01(rng); };
  for (int trial = 0; trial < 200; ++trial) {
    const irt::IrtParams truth{u(3.0, 20.0), u(-0.8, -0.2), u(0.0, 0.3)};
    const auto obs = noiseless(truth, {0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
    const auto res = nls::fit(obs);
    EXPECT_NEAR(res.params.k, truth.k, 1e-4) << trial;
    EXPECT_NEAR(res.params.mu, truth.mu, 1e-4) << trial;
    EXPECT_NEAR(res.params.b, truth.b, 1e-4) << trial;
  }
}

TEST(NlsFit, MonotoneDescentAndBoundRespect) {
  scaffold::Rng rng(23);
  nls::FitConfig config;
  config.bounds = {1.0, 15.0, -0.9, 0.0, 0.0, 0.2};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Observation> obs;
    const int count = 2 + static_cast<int>(rng() % 5);
    for (int j = 0; j < count; ++j) {
      obs.push_back({scaffold::uniform01(rng), scaffold::uniform01(rng), 1.0 + (rng() % 3)});
    }
    const auto res = nls::fit(obs, config);
    const auto& costs = res.report.cost_history;
    for (std::size_t i = 1; i < costs.size(); ++i) EXPECT_LE(costs[i], costs[i - 1]);
    for (const auto& it : res.report.iterates) EXPECT_TRUE(config.bounds.contains(it));
    EXPECT_TRUE(config.bounds.contains(res.params));
    EXPECT_DOUBLE_EQ(res.report.residual, costs.back());
  }
}

TEST(NlsFit, Deterministic) {
  const std::vector<Observation> obs{{0.0, 0.0, 1.0}, {0.3, 0.25, 2.0}, {0.7, 0.875, 1.0},
                                     {1.0, 1.0, 1.0}};
  const auto a = nls::fit(obs);
  const auto b = nls::fit(obs);
  EXPECT_EQ(a.params.k, b.params.k);
  EXPECT_EQ(a.params.mu, b.params.mu);
  EXPECT_EQ(a.params.b, b.params.b);
  EXPECT_EQ(a.report.iterations, b.report.iterations);
}

TEST(NlsFit, WeightEqualsReplication) {
  const std::vector<Observation> weighted{{0.0, 0.0, 1.0}, {0.4, 0.3, 3.0}, {1.0, 1.0, 1.0}};
  const std::vector<Observation> repeated{
      {0.0, 0.0, 1.0}, {0.4, 0.3, 1.0}, {0.4, 0.3, 1.0}, {0.4, 0.3, 1.0}, {1.0, 1.0, 1.0}};
  const irt::IrtParams probe{7.0, -0.45, 0.05};
  const auto a = nls::residuals_and_jacobian(probe, weighted);
  const auto b = nls::residuals_and_jacobian(probe, repeated);
  auto sumsq = [](const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
  };
  EXPECT_NEAR(sumsq(a.residuals), sumsq(b.residuals), 1e-15);
}

TEST(NlsFit, ReportsNonConvergence) {
  nls::FitConfig config;
  config.max_iterations = 1;
  const auto obs = noiseless({8.0, -0.5, 0.1}, {0.0, 0.25, 0.5, 0.75, 1.0});
  const auto res = nls::fit(obs, config);
  EXPECT_FALSE(res.report.converged);
  EXPECT_EQ(res.report.iterations, 1);
  EXPECT_LE(res.report.residual, res.report.cost_history.front());
}

TEST(NlsFit, RejectsBadInput) {
  EXPECT_THROW(nls::fit(std::vector<Observation>{}), std::invalid_argument);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(nls::fit(std::vector<Observation>{{nan, 0.5, 1.0}}), std::invalid_argument);
  EXPECT_THROW(nls::fit(std::vector<Observation>{{0.5, 1.5, 1.0}}), std::invalid_argument);
  EXPECT_THROW(nls::fit(std::vector<Observation>{{0.5, 0.5, 0.0}}), std::invalid_argument);
}

TEST(NlsConfig, Validation) {
  nls::FitConfig config;
  EXPECT_NO_THROW(config.validate());
  config.bounds.k_min = 200.0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = {};
  config.initial = irt::IrtParams{10.0, -0.5, 0.9};
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = {};
  config.bounds.mu_max = std::numeric_limits<double>::infinity();
  EXPECT_THROW(config.validate(), std::invalid_argument);
}

TEST(NlsInitialGuess, DerivedFromData) {
  const std::vector<Observation> obs{{0.2, 0.3, 1.0}, {0.6, 0.1, 1.0}};
  const auto g = nls::default_initial_guess(obs, {});
  EXPECT_DOUBLE_EQ(g.k, 10.0);
  EXPECT_DOUBLE_EQ(g.mu, -0.4);
  EXPECT_DOUBLE_EQ(g.b, 0.1);
  // Projected into the bounds.
  nls::FitBounds tight{0.5, 5.0, -0.2, 1.0, 0.0, 0.05};
  const auto p = nls::default_initial_guess(obs, tight);
  EXPECT_DOUBLE_EQ(p.k, 5.0);
  EXPECT_DOUBLE_EQ(p.mu, -0.2);
  EXPECT_DOUBLE_EQ(p.b, 0.05);
}

TEST(NlsResiduals, ZeroAtInterpolatingParameters) {
  const irt::IrtParams truth{9.0, -0.4, 0.2};
  const auto sys = nls::residuals_and_jacobian(truth, noiseless(truth, {0.1, 0.5, 0.9}));
  for (double r : sys.residuals) EXPECT_EQ(r, 0.0);
}

TEST(NlsResiduals, SqrtWeighting) {
  const irt::IrtParams params{9.0, -0.4, 0.2};
  const auto one = nls::residuals_and_jacobian(params, std::vector<Observation>{{0.3, 0.9, 1.0}});
  const auto four = nls::residuals_and_jacobian(params, std::vector<Observation>{{0.3, 0.9, 4.0}});
  EXPECT_DOUBLE_EQ(four.residuals[0], 2.0 * one.residuals[0]);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(four.jacobian[0][c], 2.0 * one.jacobian[0][c]);
}

TEST(NlsResiduals, JacobianMatchesFiniteDifferences) {
  scaffold::Rng rng(24);
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * scaffold::uniform01(rng); };
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Observation> obs;
    const int count = 1 + static_cast<int>(rng() % 6);
    for (int j = 0; j < count; ++j) obs.push_back({u(0, 1), u(0, 1), 1.0 + (rng() % 4)});
    const std::vector<double> x{u(0.5, 40.0), u(-1.5, 0.5), u(0.0, 0.45)};
    const auto sys = nls::residuals_and_jacobian({x[0], x[1], x[2]}, obs);
    for (int j = 0; j < count; ++j) {
      auto rj = [&](const std::vector<double>& v) {
        return nls::residuals_and_jacobian({v[0], v[1], v[2]}, obs).residuals[j];
      };
      const auto numeric = testing_support::numeric_gradient(rj, x, 1e-6);
      const std::vector<double> analytic(sys.jacobian[j].begin(), sys.jacobian[j].end());
      EXPECT_LT(testing_support::max_relative_error(analytic, numeric), 1e-5) << trial;
    }
  }
}
