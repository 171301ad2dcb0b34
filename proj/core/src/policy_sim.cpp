#include "scaffold/policy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "scaffold/errors.hpp"

namespace scaffold::sim {

// ---------------------------------------------------------------------------
// Oracle learners

std::vector<int> oracle_rollouts(const OracleLearner& learner, double rate, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("oracle_rollouts: n must be >= 1");
  const double success = irt::forward(learner.truth, rate);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (auto& r : out) r = uniform01(rng) < success ? 1 : 0;
  return out;
}

OracleLearner drift(const OracleLearner& learner, const nls::FitBounds& bounds) {
  OracleLearner next = learner;
  next.truth.mu = std::clamp(learner.truth.mu + learner.drift_rate, bounds.mu_min, bounds.mu_max);
  return next;
}

OraclePopulation make_oracle_population(const OraclePopulationSpec& spec, std::uint64_t seed) {
  if (spec.count < 1) throw ConfigError("oracle population: count must be >= 1");
  if (spec.solution_min < 1 || spec.solution_max < spec.solution_min) {
    throw ConfigError("oracle population: bad solution length range");
  }
  OraclePopulation pop;
  auto uniform = [](Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
  for (int i = 0; i < spec.count; ++i) {
    Rng rng = make_stream(seed, {0x6f7261636c65ULL, static_cast<std::uint64_t>(i)});
    OracleLearner learner;
    learner.truth = {uniform(rng, spec.k_min, spec.k_max), uniform(rng, spec.mu_min, spec.mu_max),
                     uniform(rng, spec.b_min, spec.b_max)};
    learner.drift_rate = uniform(rng, spec.drift_min, spec.drift_max);
    learner.seed = derive_seed(seed, {0x6c6561726eULL, static_cast<std::uint64_t>(i)});
    if (!irt::is_valid(learner.truth)) throw ConfigError("oracle population: invalid 3PL ranges");

    const auto span_len = static_cast<std::uint64_t>(spec.solution_max - spec.solution_min + 1);
    const auto len = static_cast<std::size_t>(spec.solution_min) +
                     static_cast<std::size_t>(rng() % span_len);
    controller::Problem problem;
    problem.id = "oracle-" + std::to_string(i);
    problem.prompt = {i % 10};
    problem.solution.resize(len);
    for (std::size_t t = 0; t < len; ++t) problem.solution[t] = static_cast<int>(t % 10);
    problem.step_boundaries = {len};
    pop.problems.push_back(std::move(problem));
    pop.learners.push_back(learner);
  }
  return pop;
}

// ---------------------------------------------------------------------------
// TabularPolicy

TabularPolicy::TabularPolicy(PolicyShape shape) : shape_(shape) {
  if (shape_.vocab_size < 1) throw ConfigError("policy: vocabulary must be non-empty");
  if (shape_.max_length < 1) throw ConfigError("policy: max_length must be >= 1");
  if (shape_.window < 0) throw ConfigError("policy: window must be >= 0");
  num_actions_ = shape_.vocab_size + (shape_.terminator ? 1 : 0);
  base_ = static_cast<std::size_t>(shape_.vocab_size) + 1;
  const std::size_t cap = shape_.max_states;
  window_space_ = 1;
  for (int i = 0; i < shape_.window; ++i) {
    if (window_space_ > cap / base_) throw ConfigError("policy: state space exceeds max_states");
    window_space_ *= base_;
  }
  const auto positions = static_cast<std::size_t>(shape_.max_length);
  if (window_space_ > cap / positions) throw ConfigError("policy: state space exceeds max_states");
  num_states_ = positions * window_space_;
  logits_.assign(num_states_ * static_cast<std::size_t>(num_actions_), 0.0);
}

void TabularPolicy::check_token(int token) const {
  if (token < 0 || token >= shape_.vocab_size) {
    throw std::out_of_range("policy: token " + std::to_string(token) + " outside vocabulary");
  }
}

std::size_t TabularPolicy::window_code(std::span<const int> context) const {
  const std::size_t bos = base_ - 1;
  const auto w = static_cast<std::size_t>(shape_.window);
  std::size_t code = 0;
  for (std::size_t i = 0; i < w; ++i) {
    // Oldest visible slot first; slots before the context start hold BOS.
    const std::size_t back = w - i;
    std::size_t digit = bos;
    if (back <= context.size()) {
      const int tok = context[context.size() - back];
      check_token(tok);
      digit = static_cast<std::size_t>(tok);
    }
    code = code * base_ + digit;
  }
  return code;
}

std::size_t TabularPolicy::next_code(std::size_t code, int token) const {
  if (window_space_ == 1) return 0;
  return (code * base_ + static_cast<std::size_t>(token)) % window_space_;
}

std::size_t TabularPolicy::state(std::size_t position, std::size_t code) const {
  if (position >= static_cast<std::size_t>(shape_.max_length) || code >= window_space_) {
    throw std::out_of_range("policy: state outside the table");
  }
  return position * window_space_ + code;
}

std::size_t TabularPolicy::state_after(std::span<const int> prompt,
                                       std::span<const int> response) const {
  std::vector<int> context(prompt.begin(), prompt.end());
  context.insert(context.end(), response.begin(), response.end());
  return state(response.size(), window_code(context));
}

std::span<const double> TabularPolicy::logits(std::size_t s) const {
  return std::span<const double>(logits_).subspan(s * static_cast<std::size_t>(num_actions_),
                                                  static_cast<std::size_t>(num_actions_));
}

std::span<double> TabularPolicy::logits(std::size_t s) {
  return std::span<double>(logits_).subspan(s * static_cast<std::size_t>(num_actions_),
                                            static_cast<std::size_t>(num_actions_));
}

std::size_t TabularPolicy::parameter_index(std::size_t s, int action) const {
  return s * static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(action);
}

void TabularPolicy::probabilities(std::size_t s, std::span<double> out,
                                  double temperature) const {
  const auto z = logits(s);
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : z) mx = std::max(mx, v / temperature);
  double total = 0.0;
  for (std::size_t a = 0; a < z.size(); ++a) {
    out[a] = std::exp(z[a] / temperature - mx);
    total += out[a];
  }
  for (std::size_t a = 0; a < z.size(); ++a) out[a] /= total;
}

void TabularPolicy::log_probabilities(std::size_t s, std::span<double> out) const {
  const auto z = logits(s);
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  for (std::size_t a = 0; a < z.size(); ++a) out[a] = z[a] - lse;
}

double TabularPolicy::log_probability(std::size_t s, int action) const {
  const auto z = logits(s);
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - mx);
  return z[static_cast<std::size_t>(action)] - mx - std::log(total);
}

// ---------------------------------------------------------------------------
// Verifier and tasks

Verifier Verifier::exact_match(std::vector<int> reference) {
  Verifier v;
  v.kind_ = VerifierKind::ExactMatch;
  v.reference_ = std::move(reference);
  return v;
}

Verifier Verifier::prefix_match(std::vector<int> reference) {
  Verifier v;
  v.kind_ = VerifierKind::PrefixMatch;
  v.reference_ = std::move(reference);
  return v;
}

Verifier Verifier::custom(Predicate predicate) {
  Verifier v;
  v.kind_ = VerifierKind::Custom;
  v.predicate_ = std::move(predicate);
  return v;
}

int Verifier::operator()(std::span<const int> response) const {
  switch (kind_) {
    case VerifierKind::ExactMatch:
      return std::equal(response.begin(), response.end(), reference_.begin(), reference_.end())
                 ? 1
                 : 0;
    case VerifierKind::PrefixMatch:
      return response.size() >= reference_.size() &&
                     std::equal(reference_.begin(), reference_.end(), response.begin())
                 ? 1
                 : 0;
    case VerifierKind::Custom:
      return predicate_(response) != 0 ? 1 : 0;
  }
  return 0;
}

SyntheticTask task_from_problem(const controller::Problem& problem) {
  return {problem.id, problem.prompt, problem.solution, Verifier::exact_match(problem.solution)};
}

std::vector<controller::Problem> make_arithmetic_family(const ArithmeticFamilySpec& spec,
                                                        std::uint64_t seed) {
  const int v = spec.vocab_size;
  if (v < 2) throw ConfigError("arithmetic family: vocabulary must have >= 2 symbols");
  if (spec.length < 1) throw ConfigError("arithmetic family: length must be >= 1");
  if (spec.count < 1 || spec.count > v * (v - 1)) {
    throw ConfigError("arithmetic family: count must be in [1, V (V - 1)]");
  }
  std::vector<std::pair<int, int>> pairs;
  for (int a0 = 0; a0 < v; ++a0) {
    for (int d = 1; d < v; ++d) pairs.emplace_back(a0, d);
  }
  // Fisher-Yates with the project's stream so the draw is library independent.
  Rng rng = make_stream(seed, {0x6172697468ULL});
  for (std::size_t i = pairs.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(pairs[i], pairs[j]);
  }
  std::vector<controller::Problem> out;
  for (int i = 0; i < spec.count; ++i) {
    const auto [a0, d] = pairs[static_cast<std::size_t>(i)];
    controller::Problem p;
    p.id = "arith-" + std::to_string(a0) + "-" + std::to_string(d);
    p.prompt = {a0, d};
    for (int t = 1; t <= spec.length; ++t) p.solution.push_back((a0 + t * d) % v);
    const auto len = static_cast<std::size_t>(spec.length);
    const auto stride = static_cast<std::size_t>(std::max(spec.step_tokens, 1));
    for (std::size_t b = stride; b < len; b += stride) p.step_boundaries.push_back(b);
    p.step_boundaries.push_back(len);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rollouts

void RolloutBatch::append(RolloutBatch&& other) {
  rollouts.insert(rollouts.end(), std::make_move_iterator(other.rollouts.begin()),
                  std::make_move_iterator(other.rollouts.end()));
}

std::span<const int> visible_tokens(const TabularPolicy& policy, std::span<const int> tokens) {
  if (!tokens.empty() && tokens.back() == policy.terminator_action()) {
    return tokens.first(tokens.size() - 1);
  }
  return tokens;
}

namespace {

void check_task(const TabularPolicy& policy, const SyntheticTask& task, std::size_t hint_length) {
  if (hint_length > task.solution.size()) {
    throw std::invalid_argument("hint length exceeds the reference solution");
  }
  if (task.solution.size() > static_cast<std::size_t>(policy.shape().max_length)) {
    throw std::invalid_argument("reference solution longer than the policy's max_length");
  }
  for (int t : task.prompt) policy.check_token(t);
  for (int t : task.solution) policy.check_token(t);
}

}  // namespace

RolloutBatch sample_rollouts(const TabularPolicy& policy, const SyntheticTask& task,
                             std::size_t hint_length, int n, double temperature,
                             std::uint64_t stream_seed) {
  check_task(policy, task, hint_length);
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  const auto max_len = static_cast<std::size_t>(policy.shape().max_length);
  const int eos = policy.terminator_action();

  std::vector<int> context(task.prompt);
  context.insert(context.end(), task.solution.begin(),
                 task.solution.begin() + static_cast<long>(hint_length));
  const std::size_t start_code = policy.window_code(context);

  RolloutBatch batch;
  batch.rollouts.reserve(static_cast<std::size_t>(n));
  std::vector<double> probs(static_cast<std::size_t>(policy.num_actions()));
  for (int j = 0; j < n; ++j) {
    Rng rng = make_stream(stream_seed, {static_cast<std::uint64_t>(j)});
    Rollout r;
    r.prompt = task.prompt;
    r.hint_length = hint_length;
    r.tokens.assign(task.solution.begin(), task.solution.begin() + static_cast<long>(hint_length));
    r.log_probs.assign(hint_length, std::numeric_limits<double>::quiet_NaN());
    std::size_t code = start_code;
    for (std::size_t t = hint_length; t < max_len; ++t) {
      const std::size_t s = policy.state(t, code);
      policy.probabilities(s, probs, temperature);
      const double u = uniform01(rng);
      int action = policy.num_actions() - 1;
      double acc = 0.0;
      for (int a = 0; a < policy.num_actions(); ++a) {
        acc += probs[static_cast<std::size_t>(a)];
        if (u < acc) {
          action = a;
          break;
        }
      }
      r.tokens.push_back(action);
      r.log_probs.push_back(std::log(probs[static_cast<std::size_t>(action)]));
      if (action == eos) {
        r.terminated = true;
        break;
      }
      code = policy.next_code(code, action);
    }
    r.reward = task.verifier(visible_tokens(policy, r.tokens));
    r.token_advantages.assign(r.tokens.size(), 0.0);
    batch.rollouts.push_back(std::move(r));
  }
  return batch;
}

void enumerate_responses(
    const TabularPolicy& policy, std::span<const int> prompt, std::span<const int> prefix,
    std::size_t cap,
    const std::function<void(std::span<const int> tokens, double log_prob)>& visit) {
  const auto max_len = static_cast<std::size_t>(policy.shape().max_length);
  if (prefix.size() > max_len) throw std::invalid_argument("prefix longer than max_length");
  std::vector<int> context(prompt.begin(), prompt.end());
  context.insert(context.end(), prefix.begin(), prefix.end());
  std::vector<int> tokens(prefix.begin(), prefix.end());
  std::size_t leaves = 0;
  const int eos = policy.terminator_action();

  auto emit = [&](double lp) {
    if (++leaves > cap) {
      throw std::length_error(
          "response space exceeds the enumeration cap; use Monte-Carlo estimation");
    }
    visit(tokens, lp);
  };

  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t t,
                                                                   std::size_t code, double lp) {
    if (t == max_len) {
      emit(lp);
      return;
    }
    std::vector<double> local(static_cast<std::size_t>(policy.num_actions()));
    policy.log_probabilities(policy.state(t, code), local);
    for (int a = 0; a < policy.num_actions(); ++a) {
      const double la = local[static_cast<std::size_t>(a)];
      if (la == -std::numeric_limits<double>::infinity()) continue;
      tokens.push_back(a);
      if (a == eos) {
        emit(lp + la);
      } else {
        walk(t + 1, policy.next_code(code, a), lp + la);
      }
      tokens.pop_back();
    }
  };
  walk(prefix.size(), policy.window_code(context), 0.0);
}

double exact_accuracy(const TabularPolicy& policy, const SyntheticTask& task,
                      std::size_t hint_length, std::size_t cap) {
  check_task(policy, task, hint_length);
  const auto max_len = static_cast<std::size_t>(policy.shape().max_length);
  const std::span<const int> hint(task.solution.data(), hint_length);
  const auto kind = task.verifier.kind();

  if (kind == VerifierKind::Custom) {
    double total = 0.0;
    enumerate_responses(policy, task.prompt, hint, cap,
                        [&](std::span<const int> tokens, double lp) {
                          total += std::exp(lp) * task.verifier(visible_tokens(policy, tokens));
                        });
    return total;
  }

  const auto& ref = task.verifier.reference();
  for (int t : ref) policy.check_token(t);
  if (ref.size() > max_len || hint_length > ref.size() ||
      !std::equal(hint.begin(), hint.end(), ref.begin())) {
    return 0.0;
  }
  std::vector<int> context(task.prompt);
  context.insert(context.end(), hint.begin(), hint.end());
  std::size_t code = policy.window_code(context);
  double log_total = 0.0;
  for (std::size_t t = hint_length; t < ref.size(); ++t) {
    log_total += policy.log_probability(policy.state(t, code), ref[t]);
    code = policy.next_code(code, ref[t]);
  }
  if (kind == VerifierKind::ExactMatch && ref.size() < max_len) {
    if (policy.terminator_action() < 0) return 0.0;
    log_total += policy.log_probability(policy.state(ref.size(), code), policy.terminator_action());
  }
  return std::exp(log_total);
}

}  // namespace scaffold::sim
