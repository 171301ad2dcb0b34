#include "scaffold/theory_lab.hpp"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "scaffold/errors.hpp"

namespace scaffold::theory {
namespace {

// Calls visit(tokens, prob, score) for every response, with the score
// restricted to the selected logits.
template <typename Visit>
void for_each_response(const sim::TabularPolicy& policy, std::span<const int> prompt,
                       const ParameterSelection& selection, std::size_t cap, Visit&& visit) {
  std::unordered_map<std::size_t, Eigen::Index> slot;
  for (std::size_t i = 0; i < selection.size(); ++i) {
    slot.emplace(selection[i], static_cast<Eigen::Index>(i));
  }
  const auto dim = static_cast<Eigen::Index>(selection.size());
  const auto actions = static_cast<std::size_t>(policy.num_actions());
  std::vector<double> probs(actions);
  Eigen::VectorXd score(dim);

  sim::enumerate_responses(
      policy, prompt, {}, cap, [&](std::span<const int> tokens, double log_prob) {
        score.setZero();
        std::size_t code = policy.window_code(prompt);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
          const std::size_t s = policy.state(t, code);
          policy.probabilities(s, probs);
          for (std::size_t a = 0; a < actions; ++a) {
            const auto it = slot.find(policy.parameter_index(s, static_cast<int>(a)));
            if (it == slot.end()) continue;
            score[it->second] += (static_cast<int>(a) == tokens[t] ? 1.0 : 0.0) - probs[a];
          }
          if (tokens[t] != policy.terminator_action()) code = policy.next_code(code, tokens[t]);
        }
        visit(tokens, std::exp(log_prob), score);
      });
}

struct LossTerms {
  double accuracy = 0.0;
  double kl = 0.0;  // KL(old || current)
};

LossTerms evaluate(const sim::TabularPolicy& old, const sim::TabularPolicy& current,
                   std::span<const int> prompt, const RewardFn& reward, std::size_t cap) {
  // Keyed by the full response so both enumerations can be matched.
  std::map<std::vector<int>, double> old_logp;
  sim::enumerate_responses(old, prompt, {}, cap, [&](std::span<const int> tokens, double lp) {
    old_logp.emplace(std::vector<int>(tokens.begin(), tokens.end()), lp);
  });
  LossTerms out;
  sim::enumerate_responses(current, prompt, {}, cap, [&](std::span<const int> tokens, double lp) {
    const double p = std::exp(lp);
    out.accuracy += p * reward(sim::visible_tokens(current, tokens));
    const auto it = old_logp.find(std::vector<int>(tokens.begin(), tokens.end()));
    if (it != old_logp.end()) out.kl += std::exp(it->second) * (it->second - lp);
  });
  return out;
}

}  // namespace

ParameterSelection reachable_parameters(const sim::TabularPolicy& policy,
                                        std::span<const int> prompt, std::size_t cap) {
  std::set<std::size_t> states;
  sim::enumerate_responses(policy, prompt, {}, cap, [&](std::span<const int> tokens, double) {
    std::size_t code = policy.window_code(prompt);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      states.insert(policy.state(t, code));
      if (tokens[t] != policy.terminator_action()) code = policy.next_code(code, tokens[t]);
    }
  });
  ParameterSelection out;
  for (std::size_t s : states) {
    for (int a = 0; a < policy.num_actions(); ++a) out.push_back(policy.parameter_index(s, a));
  }
  return out;
}

FisherResult fisher_matrix(const sim::TabularPolicy& policy, std::span<const int> prompt,
                           const ParameterSelection& selection, std::size_t cap) {
  const auto dim = static_cast<Eigen::Index>(selection.size());
  FisherResult out;
  out.matrix = Eigen::MatrixXd::Zero(dim, dim);
  for_each_response(policy, prompt, selection, cap,
                    [&](std::span<const int>, double p, const Eigen::VectorXd& score) {
                      out.matrix.noalias() += p * score * score.transpose();
                    });
  if (dim > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.matrix, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = eig.eigenvalues().minCoeff();
    out.max_eigenvalue = eig.eigenvalues().maxCoeff();
  }
  out.degenerate = out.max_eigenvalue < kDegenerateEigenvalue;
  return out;
}

AccuracyGradient accuracy_gradient(const sim::TabularPolicy& policy, std::span<const int> prompt,
                                   const RewardFn& reward, const ParameterSelection& selection,
                                   std::size_t cap) {
  AccuracyGradient out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(selection.size()));
  for_each_response(policy, prompt, selection, cap,
                    [&](std::span<const int> tokens, double p, const Eigen::VectorXd& score) {
                      const double r = reward(sim::visible_tokens(policy, tokens));
                      out.accuracy += p * r;
                      out.gradient += (p * r) * score;
                    });
  return out;
}

NaturalStep natural_gradient_step(const sim::TabularPolicy& policy, std::span<const int> prompt,
                                  const RewardFn& reward, double beta,
                                  const ParameterSelection& selection, std::size_t cap) {
  if (!(beta > 0.0)) throw std::invalid_argument("natural_gradient_step: beta must be positive");
  const auto fisher = fisher_matrix(policy, prompt, selection, cap);
  const auto grad = accuracy_gradient(policy, prompt, reward, selection, cap);

  NaturalStep out;
  out.accuracy = grad.accuracy;
  out.accuracy_gradient = grad.gradient;
  const auto dim = static_cast<Eigen::Index>(selection.size());
  out.step = Eigen::VectorXd::Zero(dim);
  if (dim == 0) return out;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fisher.matrix);
  const auto& values = eig.eigenvalues();
  const auto& vectors = eig.eigenvectors();
  const double cutoff = std::max(kDegenerateEigenvalue, 1e-10 * values.maxCoeff());

  // Pseudo-inverse applied in the eigenbasis.
  const Eigen::VectorXd coeffs = vectors.transpose() * grad.gradient;
  Eigen::VectorXd scaled = Eigen::VectorXd::Zero(dim);
  double null_part = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (values[i] > cutoff) {
      scaled[i] = coeffs[i] / values[i];
      ++out.rank;
    } else {
      null_part += coeffs[i] * coeffs[i];
    }
  }
  out.degenerate = out.rank < dim;
  if (out.rank == 0 && std::sqrt(null_part) > kDegenerateEigenvalue) {
    throw NumericalError(
        "natural_gradient_step: Fisher matrix vanishes but the accuracy gradient does not");
  }
  const Eigen::VectorXd natural = vectors * scaled;
  out.step = natural / beta;
  out.quadratic_descent = grad.gradient.dot(natural) / (2.0 * beta);
  return out;
}

double efficiency_bound(double accuracy, double beta) {
  return accuracy * (1.0 - accuracy) / (2.0 * beta);
}

double taylor_tolerance(double bound) { return kTaylorRelativeTolerance * bound + 1e-15; }

BoundReport verify_bound(const sim::TabularPolicy& policy, std::span<const int> prompt,
                         const RewardFn& reward, double beta, const ParameterSelection& selection,
                         std::size_t cap) {
  const auto nat = natural_gradient_step(policy, prompt, reward, beta, selection, cap);
  sim::TabularPolicy moved = policy;
  auto params = moved.parameters();
  for (std::size_t i = 0; i < selection.size(); ++i) {
    params[selection[i]] += nat.step[static_cast<Eigen::Index>(i)];
  }
  const auto after = evaluate(policy, moved, prompt, reward, cap);

  BoundReport out;
  out.accuracy = nat.accuracy;
  // L(old) = 0 because the advantage is centred at a_old and KL(old||old) = 0.
  out.realized_descent = (after.accuracy - nat.accuracy) - beta * after.kl;
  if (!std::isfinite(out.realized_descent)) {
    throw NumericalError("verify_bound: loss is not finite after the step");
  }
  out.bound = efficiency_bound(nat.accuracy, beta);
  out.gap = out.bound - out.realized_descent;
  out.quadratic_descent = nat.quadratic_descent;
  out.step_norm = nat.step.norm();
  out.tolerance = taylor_tolerance(out.bound);
  out.degenerate_fisher = nat.degenerate;
  out.large_step = out.step_norm > kSmallStepNorm;
  out.within_bound = out.realized_descent <= out.bound + out.tolerance;
  return out;
}

namespace {

Instance two_action_instance(double success_probability, RewardFn reward) {
  if (!(success_probability > 0.0 && success_probability < 1.0)) {
    throw std::invalid_argument("two-action instance: probability must lie in (0, 1)");
  }
  sim::PolicyShape shape;
  shape.vocab_size = 2;
  shape.terminator = false;
  shape.max_length = 1;
  shape.window = 0;
  Instance inst{sim::TabularPolicy(shape), {}, std::move(reward), {}};
  const std::size_t s = inst.policy.state(0, 0);
  inst.policy.logits(s)[1] = std::log(success_probability / (1.0 - success_probability));
  inst.selection = {inst.policy.parameter_index(s, 1)};
  return inst;
}

}  // namespace

Instance bernoulli_instance(double accuracy) {
  return two_action_instance(accuracy, [](std::span<const int> tokens) {
    return !tokens.empty() && tokens.front() == 1 ? 1.0 : 0.0;
  });
}

Instance zero_reward_instance(double success_probability) {
  return two_action_instance(success_probability, [](std::span<const int>) { return 0.0; });
}

std::vector<SweepRow> descent_vs_accuracy_sweep(std::span<const double> grid, double beta,
                                                SweepFamily family) {
  std::vector<SweepRow> rows;
  for (double a : grid) {
    const auto inst =
        family == SweepFamily::Bernoulli ? bernoulli_instance(a) : zero_reward_instance(a);
    const auto rep = verify_bound(inst.policy, inst.prompt, inst.reward, beta, inst.selection);
    rows.push_back({rep.accuracy, rep.realized_descent, rep.bound, rep.quadratic_descent,
                    rep.step_norm});
  }
  return rows;
}

}  // namespace scaffold::theory
