#include <benchmark/benchmark.h>

#include <vector>

#include "scaffold/hint_controller.hpp"
#include "scaffold/irt.hpp"
#include "scaffold/nls_fitter.hpp"
#include "scaffold/policy_sim.hpp"
#include "scaffold/rl_core.hpp"
#include "scaffold/theory_lab.hpp"

namespace irt = scaffold::irt;
namespace nls = scaffold::nls;
namespace sim = scaffold::sim;
namespace rl = scaffold::rl;
namespace ctl = scaffold::controller;

namespace {

sim::TabularPolicy arithmetic_policy(std::uint64_t seed) {
  sim::TabularPolicy policy({10, true, 8, 2});
  scaffold::Rng rng(seed);
  for (double& z : policy.parameters()) z = 2.0 * scaffold::uniform01(rng) - 1.0;
  return policy;
}

// Four rounds of eight rollouts on one arithmetic problem, hints of 0..3 tokens.
sim::RolloutBatch arithmetic_batch(const sim::TabularPolicy& policy, const ctl::Problem& problem) {
  const auto task = sim::task_from_problem(problem);
  sim::RolloutBatch batch;
  for (int round = 0; round < 4; ++round) {
    auto part = sim::sample_rollouts(policy, task, static_cast<std::size_t>(round), 8, 1.0,
                                     static_cast<std::uint64_t>(round));
    for (auto& r : part.rollouts) r.reward = static_cast<int>(r.tokens.size() % 2);
    batch.append(std::move(part));
  }
  rl::assign_advantages(batch);
  return batch;
}

}  // namespace

static void BM_IrtForward(benchmark::State& state) {
  const irt::IrtParams params{12.0, -0.6, 0.1};
  double p = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(irt::forward(params, p));
    p = p < 1.0 ? p + 1e-3 : 0.0;
  }
}
BENCHMARK(BM_IrtForward);

static void BM_IrtInverse(benchmark::State& state) {
  const irt::IrtParams params{12.0, -0.6, 0.1};
  for (auto _ : state) benchmark::DoNotOptimize(irt::inverse(params, 0.5));
}
BENCHMARK(BM_IrtInverse);

static void BM_Fit(benchmark::State& state) {
  const irt::IrtParams truth{12.0, -0.6, 0.1};
  std::vector<nls::Observation> obs;
  const auto points = state.range(0);
  for (long i = 0; i < points; ++i) {
    const double p = static_cast<double>(i) / static_cast<double>(points - 1);
    obs.push_back({p, irt::forward(truth, p), 1.0});
  }
  for (auto _ : state) benchmark::DoNotOptimize(nls::fit(obs));
}
BENCHMARK(BM_Fit)->Arg(3)->Arg(5)->Arg(10);

static void BM_NextRate(benchmark::State& state) {
  ctl::HintAccuracyMemory memory;
  memory.entries = {{0.8, 0.875}, {0.55, 0.375}, {0.62, 0.5}};
  const ctl::ControllerConfig config;
  nls::FitConfig fit;
  fit.bounds.k_max = 20.0;
  for (auto _ : state) benchmark::DoNotOptimize(ctl::next_rate(memory, config, fit, 200));
}
BENCHMARK(BM_NextRate);

static void BM_SampleRollouts(benchmark::State& state) {
  const auto policy = arithmetic_policy(1);
  const auto problems = sim::make_arithmetic_family({}, 1);
  const auto task = sim::task_from_problem(problems[0]);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sim::sample_rollouts(policy, task, 2, 32, 1.0, ++seed));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_SampleRollouts);

static void BM_ExactAccuracy(benchmark::State& state) {
  const auto policy = arithmetic_policy(2);
  const auto problems = sim::make_arithmetic_family({}, 1);
  const auto task = sim::task_from_problem(problems[0]);
  for (auto _ : state) benchmark::DoNotOptimize(sim::exact_accuracy(policy, task, 0));
}
BENCHMARK(BM_ExactAccuracy);

static void BM_SurrogateGradient(benchmark::State& state) {
  const auto old = arithmetic_policy(3);
  const auto problems = sim::make_arithmetic_family({}, 1);
  const auto batch = arithmetic_batch(old, problems[0]);
  rl::LossConfig config;
  config.beta = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(rl::surrogate_loss(batch, old, old, old, config));
}
BENCHMARK(BM_SurrogateGradient);

static void BM_KlDivergence(benchmark::State& state) {
  const auto ref = arithmetic_policy(4);
  const auto policy = arithmetic_policy(5);
  const std::vector<std::vector<int>> prompts{{3, 7}};
  for (auto _ : state) benchmark::DoNotOptimize(rl::kl_divergence_with_gradient(ref, policy, prompts));
}
BENCHMARK(BM_KlDivergence)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  auto problems = sim::make_arithmetic_family({}, 1);
  auto policy = arithmetic_policy(6);
  const sim::PolicySnapshot ref = policy;
  rl::TrainSettings settings;
  settings.fit.bounds.k_max = 20.0;
  settings.loss.learning_rate = 20.0;
  const std::vector<std::size_t> batch{0, 1, 2, 3, 4, 5, 6, 7};
  long step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(rl::train_step(problems, batch, policy, ref, settings, step++));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

static void BM_VerifyBound(benchmark::State& state) {
  sim::TabularPolicy policy({3, true, 3, 1});
  scaffold::Rng rng(7);
  for (double& z : policy.parameters()) z = 2.0 * scaffold::uniform01(rng) - 1.0;
  const std::vector<int> prompt{0};
  const auto selection = scaffold::theory::reachable_parameters(policy, prompt);
  const scaffold::theory::RewardFn reward = [](std::span<const int> y) {
    return y.size() == 2 && y[0] == 1 && y[1] == 2 ? 1.0 : 0.0;
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(scaffold::theory::verify_bound(policy, prompt, reward, 10.0, selection));
  }
}
BENCHMARK(BM_VerifyBound);

BENCHMARK_MAIN();
