#include "scaffold/hint_controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scaffold/errors.hpp"

namespace scaffold::controller {

void ControllerConfig::validate() const {
  if (rounds < 1) throw ConfigError("controller: rounds (m) must be >= 1");
  if (rollouts_per_round < 1) throw ConfigError("controller: rollouts per round (n) must be >= 1");
  if (!(target_accuracy > 0.0 && target_accuracy < 1.0)) {
    throw ConfigError("controller: target accuracy must lie strictly between 0 and 1");
  }
}

double cold_start_rate(std::size_t solution_length, const HintAccuracyMemory& memory,
                       bool epoch_persistence) {
  if (solution_length == 0) {
    throw DataError("controller: problem has an empty reference solution");
  }
  if (epoch_persistence && memory.persisted_rate) return *memory.persisted_rate;
  const auto len = static_cast<double>(solution_length);
  return (len - 1.0) / len;
}

std::vector<nls::Observation> augment_with_margins(const HintAccuracyMemory& memory) {
  std::vector<nls::Observation> merged;
  for (const auto& e : memory.entries) {
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const nls::Observation& o) { return o.p == e.rate; });
    if (it == merged.end()) {
      merged.push_back({e.rate, e.accuracy, 1.0});
    } else {
      // Running mean keeps a_hat equal to the average of all merged rounds.
      it->a_hat = (it->a_hat * it->weight + e.accuracy) / (it->weight + 1.0);
      it->weight += 1.0;
    }
  }
  auto has_rate = [&](double p) {
    return std::any_of(merged.begin(), merged.end(),
                       [&](const nls::Observation& o) { return o.p == p; });
  };
  if (!has_rate(0.0)) merged.push_back({0.0, 0.0, 1.0});
  if (!has_rate(1.0)) merged.push_back({1.0, 1.0, 1.0});
  std::stable_sort(merged.begin(), merged.end(),
                   [](const nls::Observation& a, const nls::Observation& b) { return a.p < b.p; });
  return merged;
}

RatePrediction next_rate(const HintAccuracyMemory& memory, const ControllerConfig& config,
                         const nls::FitConfig& fit_config, std::size_t solution_length) {
  RatePrediction out;
  const auto observations = augment_with_margins(memory);
  bool ok = false;
  try {
    const auto fitted = nls::fit(observations, fit_config);
    out.params = fitted.params;
    out.fit_converged = fitted.report.converged;
    ok = fitted.report.converged;
  } catch (const std::invalid_argument&) {
    ok = false;
  }
  if (ok) {
    const auto inv = irt::inverse(*out.params, config.target_accuracy);
    out.rate = inv.rate;
    out.clamped = inv.clamped;
    out.unreachable = inv.unreachable;
    return out;
  }
  out.fallback = true;
  if (!memory.entries.empty()) {
    out.rate = memory.entries.back().rate;
  } else {
    out.rate = cold_start_rate(solution_length, HintAccuracyMemory{}, false);
  }
  return out;
}

HintPlan build_hint_plan(const Problem& problem, double rate, int round) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw std::invalid_argument("controller: hinting rate must lie in [0, 1]");
  }
  const std::size_t len = problem.solution.size();
  auto l = static_cast<std::size_t>(std::floor(rate * static_cast<double>(len) + 0.5));
  l = std::min(l, len);
  HintPlan plan;
  plan.problem_id = problem.id;
  plan.rate = rate;
  plan.hint_length = l;
  plan.round = round;
  plan.hint.assign(problem.solution.begin(), problem.solution.begin() + static_cast<long>(l));
  return plan;
}

double record_round(HintAccuracyMemory& memory, double rate, std::span<const int> rewards) {
  if (rewards.empty()) throw std::invalid_argument("controller: a round needs at least one reward");
  long hits = 0;
  for (int r : rewards) {
    if (r != 0 && r != 1) throw std::invalid_argument("controller: rewards must be binary");
    hits += r;
  }
  const double acc = static_cast<double>(hits) / static_cast<double>(rewards.size());
  memory.entries.push_back({rate, acc});
  return acc;
}

std::optional<double> finalize_step(HintAccuracyMemory& memory, bool epoch_persistence) {
  if (epoch_persistence && !memory.entries.empty()) {
    memory.persisted_rate = memory.entries.back().rate;
  } else {
    memory.persisted_rate.reset();
  }
  memory.entries.clear();
  return memory.persisted_rate;
}

StepOutcome run_rounds(Problem& problem, const ControllerConfig& config,
                       const nls::FitConfig& fit_config, long step, const RoundSampler& sampler) {
  StepOutcome out;
  HintAccuracyMemory memory;
  memory.persisted_rate = problem.persisted_rate;
  const std::size_t len = problem.solution.size();

  for (int round = 1; round <= config.rounds; ++round) {
    RatePrediction pred;
    if (round == 1) {
      pred.rate = cold_start_rate(len, memory, config.epoch_persistence);
    } else {
      pred = next_rate(memory, config, fit_config, len);
    }
    auto plan = build_hint_plan(problem, pred.rate, round);
    const auto rewards = sampler(plan);
    if (static_cast<int>(rewards.size()) != config.rollouts_per_round) {
      throw std::logic_error("controller: sampler returned the wrong number of rewards");
    }
    const double acc = record_round(memory, plan.rate, rewards);

    TraceRecord rec;
    rec.step = step;
    rec.problem_id = problem.id;
    rec.round = round;
    rec.rate = plan.rate;
    rec.hint_length = plan.hint_length;
    rec.params = pred.params;
    rec.accuracy = acc;
    rec.clamped = pred.clamped;
    rec.unreachable = pred.unreachable;
    rec.fallback = pred.fallback;
    out.trace.push_back(std::move(rec));
    out.accuracies.push_back(acc);
    out.plans.push_back(std::move(plan));
  }
  out.persisted_rate = finalize_step(memory, config.epoch_persistence);
  problem.persisted_rate = out.persisted_rate;
  return out;
}

}  // namespace scaffold::controller
