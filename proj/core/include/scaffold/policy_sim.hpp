#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scaffold/hint_controller.hpp"
#include "scaffold/irt.hpp"
#include "scaffold/nls_fitter.hpp"
#include "scaffold/random.hpp"

namespace scaffold::sim {

// ---------------------------------------------------------------------------
// Oracle learners: a hidden 3PL curve stands in for the model.

struct OracleLearner {
  irt::IrtParams truth;
  double drift_rate = 0.0;  // added to mu once per step
  std::uint64_t seed = 0;
};

/// n independent Bernoulli(forward(truth, rate)) draws.
std::vector<int> oracle_rollouts(const OracleLearner& learner, double rate, int n, Rng& rng);

/// mu += drift_rate, clamped to [mu_min, mu_max].
OracleLearner drift(const OracleLearner& learner, const nls::FitBounds& bounds);

struct OraclePopulationSpec {
  int count = 100;
  double k_min = 12.0, k_max = 20.0;
  double mu_min = -0.75, mu_max = -0.3;
  double b_min = 0.0, b_max = 0.2;
  double drift_min = 0.0, drift_max = 0.0;
  int solution_min = 64, solution_max = 512;
};

struct OraclePopulation {
  std::vector<controller::Problem> problems;
  std::vector<OracleLearner> learners;
};

OraclePopulation make_oracle_population(const OraclePopulationSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tabular softmax token policy.

struct PolicyShape {
  int vocab_size = 10;     // symbols 0..V-1
  bool terminator = true;  // adds action V, which ends the response
  int max_length = 12;     // cap on response tokens (hint + generated, terminator excluded)
  int window = 2;          // context tokens (prompt + response) visible to a state
  std::size_t max_states = std::size_t{1} << 20;
};

/// Softmax policy with one logit row per state. A state is the response
/// position t together with the last `window` context tokens, left-padded
/// with a BOS symbol. With window >= |prompt| + max_length states identify
/// the full prefix.
///
/// Window codes are base-(V+1) numbers with the newest token in the least
/// significant digit, so appending a token is (code * B + token) mod B^w.
class TabularPolicy {
 public:
  /// Throws ConfigError when the state count exceeds shape.max_states or
  /// the shape is malformed.
  explicit TabularPolicy(PolicyShape shape);

  const PolicyShape& shape() const { return shape_; }
  int num_actions() const { return num_actions_; }
  int terminator_action() const { return shape_.terminator ? shape_.vocab_size : -1; }
  std::size_t num_states() const { return num_states_; }
  std::size_t num_parameters() const { return logits_.size(); }

  /// Window code for a context (prompt followed by response tokens).
  std::size_t window_code(std::span<const int> context) const;
  std::size_t next_code(std::size_t code, int token) const;
  std::size_t state(std::size_t position, std::size_t code) const;
  /// State reached after `response` has been emitted for `prompt`.
  std::size_t state_after(std::span<const int> prompt, std::span<const int> response) const;

  std::span<const double> logits(std::size_t state) const;
  std::span<double> logits(std::size_t state);
  std::span<const double> parameters() const { return logits_; }
  std::span<double> parameters() { return logits_; }
  std::size_t parameter_index(std::size_t state, int action) const;

  /// Softmax of logits / temperature.
  void probabilities(std::size_t state, std::span<double> out, double temperature = 1.0) const;
  void log_probabilities(std::size_t state, std::span<double> out) const;
  double log_probability(std::size_t state, int action) const;

  /// Throws std::out_of_range for a token outside the symbol vocabulary.
  void check_token(int token) const;

 private:
  PolicyShape shape_;
  int num_actions_ = 0;
  std::size_t base_ = 0;
  std::size_t window_space_ = 1;
  std::size_t num_states_ = 0;
  std::vector<double> logits_;
};

/// Parameters frozen at rollout time.
using PolicySnapshot = TabularPolicy;

// ---------------------------------------------------------------------------
// Tasks and verification.

enum class VerifierKind { ExactMatch, PrefixMatch, Custom };

/// Deterministic 0/1 reward over a finished response (terminator excluded).
class Verifier {
 public:
  using Predicate = std::function<int(std::span<const int>)>;

  static Verifier exact_match(std::vector<int> reference);
  static Verifier prefix_match(std::vector<int> reference);
  static Verifier custom(Predicate predicate);

  int operator()(std::span<const int> response) const;
  VerifierKind kind() const { return kind_; }
  const std::vector<int>& reference() const { return reference_; }

 private:
  VerifierKind kind_ = VerifierKind::ExactMatch;
  std::vector<int> reference_;
  Predicate predicate_;
};

struct SyntheticTask {
  std::string id;
  std::vector<int> prompt;
  std::vector<int> solution;
  Verifier verifier;
};

/// Exact-match task over a problem's reference solution.
SyntheticTask task_from_problem(const controller::Problem& problem);

struct ArithmeticFamilySpec {
  int count = 8;
  int vocab_size = 10;
  int length = 6;
  int step_tokens = 2;
};

/// Problems with prompt [a0, d] and solution y_t = (a0 + t d) mod V,
/// t = 1..length, for distinct (a0, d) pairs with d != 0.
std::vector<controller::Problem> make_arithmetic_family(const ArithmeticFamilySpec& spec,
                                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Rollouts.

struct Rollout {
  std::size_t group = 0;  // problem label; advantages are pooled per group
  int round = 0;
  std::vector<int> prompt;
  // Response: hint tokens followed by generated tokens (terminator included
  // when emitted).
  std::vector<int> tokens;
  std::size_t hint_length = 0;
  // Sampling log-probability per token; NaN at hint positions.
  std::vector<double> log_probs;
  // Advantage per token; only generated positions are ever read.
  std::vector<double> token_advantages;
  int reward = 0;
  bool terminated = false;

  std::size_t generated_length() const { return tokens.size() - hint_length; }
};

struct RolloutBatch {
  std::vector<Rollout> rollouts;

  void append(RolloutBatch&& other);
};

/// Samples n responses for prompt + first `hint_length` solution tokens.
/// Rollout j draws from the stream derive_seed(stream_seed, {j}).
RolloutBatch sample_rollouts(const TabularPolicy& policy, const SyntheticTask& task,
                             std::size_t hint_length, int n, double temperature,
                             std::uint64_t stream_seed);

/// Walks every response reachable from prompt + prefix, calling
/// visit(tokens, log_prob) with the full response (prefix included,
/// terminator included when emitted) and the log-probability of its
/// generated part. Throws std::length_error after `cap` leaves.
void enumerate_responses(
    const TabularPolicy& policy, std::span<const int> prompt, std::span<const int> prefix,
    std::size_t cap,
    const std::function<void(std::span<const int> tokens, double log_prob)>& visit);

inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 20;

/// Expected reward at temperature 1 for the given hint length. Exact-match
/// and prefix-match verifiers are evaluated along the reference path; custom
/// verifiers by full enumeration (std::length_error beyond `cap` responses,
/// use Monte-Carlo estimation instead).
double exact_accuracy(const TabularPolicy& policy, const SyntheticTask& task,
                      std::size_t hint_length, std::size_t cap = kDefaultEnumerationCap);

/// Strips a trailing terminator, if present.
std::span<const int> visible_tokens(const TabularPolicy& policy, std::span<const int> tokens);

}  // namespace scaffold::sim
