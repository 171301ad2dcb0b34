#include "scaffold/rl_core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "scaffold/errors.hpp"

namespace scaffold::rl {

void LossConfig::validate() const {
  if (!(beta >= 0.0) || !(gamma >= 0.0)) throw ConfigError("loss: beta and gamma must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("loss: epsilon must lie in (0, 1)");
  if (iterations < 1) throw ConfigError("loss: iterations (u) must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("loss: learning rate must be positive");
  }
}

std::vector<double> advantages(std::span<const int> rewards) {
  if (rewards.empty()) throw std::invalid_argument("advantages: empty reward group");
  const double mean =
      std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
  std::vector<double> out;
  out.reserve(rewards.size());
  for (int r : rewards) out.push_back(static_cast<double>(r) - mean);
  return out;
}

void assign_advantages(sim::RolloutBatch& batch) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.rollouts.size(); ++i) {
    groups[batch.rollouts[i].group].push_back(i);
  }
  for (const auto& [group, members] : groups) {
    std::vector<int> rewards;
    rewards.reserve(members.size());
    for (std::size_t i : members) rewards.push_back(batch.rollouts[i].reward);
    const auto adv = advantages(rewards);
    for (std::size_t j = 0; j < members.size(); ++j) {
      auto& r = batch.rollouts[members[j]];
      r.token_advantages.assign(r.tokens.size(), 0.0);
      for (std::size_t t = r.hint_length; t < r.tokens.size(); ++t) r.token_advantages[t] = adv[j];
    }
  }
}

namespace {

// grad[logits(s)] += scale * (e_action - pi(.|s))
void add_score(const sim::TabularPolicy& policy, std::size_t s, int action, double scale,
               std::span<const double> probs, std::vector<double>& grad) {
  const std::size_t base = policy.parameter_index(s, 0);
  for (int a = 0; a < policy.num_actions(); ++a) {
    grad[base + static_cast<std::size_t>(a)] -= scale * probs[static_cast<std::size_t>(a)];
  }
  grad[base + static_cast<std::size_t>(action)] += scale;
}

void check_compatible(const sim::TabularPolicy& a, const sim::TabularPolicy& b) {
  if (a.num_parameters() != b.num_parameters() || a.num_actions() != b.num_actions() ||
      a.shape().window != b.shape().window || a.shape().max_length != b.shape().max_length) {
    throw std::invalid_argument("policies do not share a state space");
  }
}

}  // namespace

KlValue kl_divergence_with_gradient(const sim::PolicySnapshot& ref,
                                    const sim::TabularPolicy& policy,
                                    std::span<const std::vector<int>> prompts) {
  check_compatible(ref, policy);
  KlValue out;
  out.gradient.assign(policy.num_parameters(), 0.0);
  const auto actions = static_cast<std::size_t>(policy.num_actions());
  const auto max_len = static_cast<std::size_t>(policy.shape().max_length);
  const int eos = policy.terminator_action();
  std::vector<double> p(actions), lp(actions), q(actions), lq(actions);

  for (const auto& prompt : prompts) {
    // Visitation mass under the reference policy, one map per position.
    std::map<std::size_t, double> level;
    level[policy.window_code(prompt)] = 1.0;
    for (std::size_t t = 0; t < max_len && !level.empty(); ++t) {
      std::map<std::size_t, double> next;
      for (const auto& [code, mass] : level) {
        const std::size_t s = policy.state(t, code);
        ref.probabilities(s, p);
        ref.log_probabilities(s, lp);
        policy.probabilities(s, q);
        policy.log_probabilities(s, lq);
        double kl_s = 0.0;
        for (std::size_t a = 0; a < actions; ++a) {
          if (p[a] > 0.0) kl_s += p[a] * (lp[a] - lq[a]);
        }
        out.value += mass * kl_s;
        const std::size_t base = policy.parameter_index(s, 0);
        for (std::size_t a = 0; a < actions; ++a) out.gradient[base + a] += mass * (q[a] - p[a]);
        if (t + 1 == max_len) continue;
        for (std::size_t a = 0; a < actions; ++a) {
          if (static_cast<int>(a) == eos || p[a] == 0.0) continue;
          next[policy.next_code(code, static_cast<int>(a))] += mass * p[a];
        }
      }
      level = std::move(next);
    }
  }
  return out;
}

double kl_divergence(const sim::PolicySnapshot& ref, const sim::TabularPolicy& policy,
                     std::span<const std::vector<int>> prompts) {
  return kl_divergence_with_gradient(ref, policy, prompts).value;
}

LossValue surrogate_loss(const sim::RolloutBatch& batch, const sim::TabularPolicy& policy,
                         const sim::PolicySnapshot& old, const sim::PolicySnapshot& ref,
                         const LossConfig& config) {
  check_compatible(policy, old);
  check_compatible(policy, ref);
  LossValue out;
  out.gradient.assign(policy.num_parameters(), 0.0);
  if (batch.rollouts.empty()) return out;

  std::map<std::size_t, std::size_t> group_sizes;
  std::map<std::size_t, const std::vector<int>*> group_prompts;
  for (const auto& r : batch.rollouts) {
    ++group_sizes[r.group];
    group_prompts.emplace(r.group, &r.prompt);
  }
  const auto groups = static_cast<double>(group_sizes.size());

  const auto actions = static_cast<std::size_t>(policy.num_actions());
  std::vector<double> probs(actions);
  const double lo = 1.0 - config.epsilon;
  const double hi = 1.0 + config.epsilon;

  for (const auto& r : batch.rollouts) {
    const double w = 1.0 / (groups * static_cast<double>(group_sizes[r.group]));
    std::vector<int> context(r.prompt);
    context.insert(context.end(), r.tokens.begin(),
                   r.tokens.begin() + static_cast<long>(r.hint_length));
    const std::size_t gen_code = policy.window_code(context);

    // Imitation on the hint tokens: teacher-forced log-likelihood.
    if (config.gamma > 0.0 && r.hint_length > 0) {
      std::size_t code = policy.window_code(r.prompt);
      double ll = 0.0;
      std::vector<std::pair<std::size_t, int>> visited;
      for (std::size_t t = 0; t < r.hint_length; ++t) {
        const int tok = r.tokens[t];
        policy.check_token(tok);
        const std::size_t s = policy.state(t, code);
        ll += policy.log_probability(s, tok);
        visited.emplace_back(s, tok);
        code = policy.next_code(code, tok);
      }
      double value = ll;
      double scale = -config.gamma * w;
      if (config.imitation == ImitationForm::Probability) {
        value = std::exp(ll);
        scale *= value;
      }
      out.imitation -= config.gamma * w * value;
      for (const auto& [s, tok] : visited) {
        policy.probabilities(s, probs);
        add_score(policy, s, tok, scale, probs, out.gradient);
      }
    }

    // Clipped policy term on generated tokens only.
    std::size_t code = gen_code;
    for (std::size_t t = r.hint_length; t < r.tokens.size(); ++t) {
      const int tok = r.tokens[t];
      if (tok != policy.terminator_action()) policy.check_token(tok);
      const std::size_t s = policy.state(t, code);
      const double adv = r.token_advantages.at(t);
      const double ratio = std::exp(policy.log_probability(s, tok) - old.log_probability(s, tok));
      const double unclipped = ratio * adv;
      const double clipped = std::clamp(ratio, lo, hi) * adv;
      if (unclipped <= clipped) {
        out.policy -= w * unclipped;
        if (adv != 0.0) {
          policy.probabilities(s, probs);
          add_score(policy, s, tok, -w * adv * ratio, probs, out.gradient);
        }
      } else {
        out.policy -= w * clipped;
      }
      if (tok != policy.terminator_action()) code = policy.next_code(code, tok);
    }
  }

  if (config.beta > 0.0) {
    std::vector<std::vector<int>> prompts;
    for (const auto& [g, prompt] : group_prompts) prompts.push_back(*prompt);
    const auto kl = kl_divergence_with_gradient(ref, policy, prompts);
    out.kl = config.beta * kl.value / groups;
    for (std::size_t i = 0; i < out.gradient.size(); ++i) {
      out.gradient[i] += config.beta * kl.gradient[i] / groups;
    }
  }
  out.total = out.policy + out.kl + out.imitation;
  return out;
}

TrainStepResult train_step(std::vector<controller::Problem>& problems,
                           std::span<const std::size_t> batch, sim::TabularPolicy& policy,
                           const sim::PolicySnapshot& ref, const TrainSettings& settings,
                           long step) {
  settings.controller.validate();
  settings.loss.validate();
  const sim::PolicySnapshot old = policy;
  const int n = settings.controller.rollouts_per_round;

  TrainStepResult result;
  sim::RolloutBatch rollouts;
  double rate_sum = 0.0;
  std::size_t rate_count = 0;

  for (std::size_t idx : batch) {
    auto& problem = problems.at(idx);
    const auto task = sim::task_from_problem(problem);
    auto sampler = [&](const controller::HintPlan& plan) {
      const auto stream = derive_seed(
          settings.seed, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(idx),
                          static_cast<std::uint64_t>(plan.round)});
      auto round_batch =
          sim::sample_rollouts(old, task, plan.hint_length, n, settings.temperature, stream);
      std::vector<int> rewards;
      for (auto& r : round_batch.rollouts) {
        r.group = idx;
        r.round = plan.round;
        rewards.push_back(r.reward);
      }
      rollouts.append(std::move(round_batch));
      rate_sum += plan.rate;
      ++rate_count;
      return rewards;
    };

    if (settings.mode == TrainingMode::Hinted) {
      auto outcome = controller::run_rounds(problem, settings.controller, settings.fit, step, sampler);
      result.trace.insert(result.trace.end(), outcome.trace.begin(), outcome.trace.end());
    } else {
      for (int round = 1; round <= settings.controller.rounds; ++round) {
        const auto plan = controller::build_hint_plan(problem, 0.0, round);
        const auto rewards = sampler(plan);
        controller::TraceRecord rec;
        rec.step = step;
        rec.problem_id = problem.id;
        rec.round = round;
        rec.accuracy = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                       static_cast<double>(rewards.size());
        result.trace.push_back(std::move(rec));
      }
    }
  }

  assign_advantages(rollouts);

  auto& m = result.metrics;
  m.step = step;
  for (const auto& r : rollouts.rollouts) {
    m.reward_mean += r.reward;
    m.length_mean += static_cast<double>(r.generated_length() - (r.terminated ? 1 : 0));
  }
  const auto count = static_cast<double>(std::max<std::size_t>(rollouts.rollouts.size(), 1));
  m.reward_mean /= count;
  m.length_mean /= count;
  m.hint_rate_mean = rate_count > 0 ? rate_sum / static_cast<double>(rate_count) : 0.0;
  result.rollouts = rollouts.rollouts.size();

  auto params = policy.parameters();
  for (int it = 0; it < settings.loss.iterations; ++it) {
    const auto loss = surrogate_loss(rollouts, policy, old, ref, settings.loss);
    if (!std::isfinite(loss.total)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << ", iteration " << it
          << " (policy=" << loss.policy << ", kl=" << loss.kl << ", imitation=" << loss.imitation
          << ")";
      throw NumericalError(msg.str());
    }
    if (it == 0) {
      m.loss_policy = loss.policy;
      m.loss_kl = loss.kl;
      m.loss_imitation = loss.imitation;
      m.loss_total = loss.total;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] -= settings.loss.learning_rate * loss.gradient[i];
    }
  }
  return result;
}

}  // namespace scaffold::rl
