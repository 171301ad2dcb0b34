#include "scaffold/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "scaffold/digest.hpp"
#include "scaffold/errors.hpp"
#include "scaffold/random.hpp"
#include "scaffold/task_io.hpp"
#include "scaffold/theory_lab.hpp"

#ifndef SCAFFOLD_VERSION
#define SCAFFOLD_VERSION "0.0.0"
#endif

namespace scaffold::harness {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::pair<Mode, const char*> kModeNames[] = {
    {Mode::ControllerOnly, "controller-only"}, {Mode::Hinted, "hinted"},
    {Mode::GrpoBaseline, "grpo-baseline"},     {Mode::TheorySweep, "theory-sweep"},
    {Mode::TargetSweep, "target-sweep"},
};

template <typename T>
void overlay(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return j.at(key);
}

// Writes one JSON record per line.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError("cannot write " + path.string());
  }
  void write(const ordered_json& rec) { out_ << rec.dump() << '\n'; }
  void close() {
    out_.close();
    if (!out_) throw DataError("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

ordered_json trace_json(const controller::TraceRecord& r) {
  ordered_json j;
  j["step"] = r.step;
  j["problem_id"] = r.problem_id;
  j["round"] = r.round;
  j["rate"] = r.rate;
  j["hint_length"] = r.hint_length;
  if (r.params) {
    j["k"] = r.params->k;
    j["mu"] = r.params->mu;
    j["b"] = r.params->b;
  } else {
    j["k"] = nullptr;
    j["mu"] = nullptr;
    j["b"] = nullptr;
  }
  j["accuracy"] = r.accuracy;
  j["clamped"] = r.clamped;
  j["unreachable"] = r.unreachable;
  j["fallback"] = r.fallback;
  return j;
}

// Mean |batch-mean accuracy of round i - target| over steps in epoch >= 1.
struct RoundStats {
  std::vector<double> deviation_sum;
  std::vector<double> accuracy_sum;
  long steps = 0;

  explicit RoundStats(int rounds)
      : deviation_sum(static_cast<std::size_t>(rounds), 0.0),
        accuracy_sum(static_cast<std::size_t>(rounds), 0.0) {}

  void add(const std::vector<double>& round_means, double target) {
    for (std::size_t i = 0; i < round_means.size(); ++i) {
      deviation_sum[i] += std::abs(round_means[i] - target);
      accuracy_sum[i] += round_means[i];
    }
    ++steps;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["post_epoch_steps"] = steps;
    std::vector<double> dev, acc;
    for (std::size_t i = 0; i < deviation_sum.size(); ++i) {
      const double n = steps > 0 ? static_cast<double>(steps) : 1.0;
      dev.push_back(deviation_sum[i] / n);
      acc.push_back(accuracy_sum[i] / n);
    }
    j["round_deviation"] = dev;
    j["round_accuracy"] = acc;
    return j;
  }
};

struct ControllerRun {
  std::vector<ordered_json> metrics;
  RoundStats stats;
  std::vector<controller::Problem> problems;
};

ControllerRun run_controller(const ExperimentConfig& cfg, double target, bool drift_on,
                             JsonlWriter* trace) {
  auto spec = cfg.population;
  if (!drift_on) spec.drift_min = spec.drift_max = 0.0;
  const std::uint64_t seed = *cfg.seed;
  auto pop = sim::make_oracle_population(spec, seed);
  if (cfg.task_set) {
    auto problems = load_tasks(*cfg.task_set);
    if (problems.size() != pop.problems.size()) {
      throw ConfigError("controller-only: population count must match the task set size");
    }
    pop.problems = std::move(problems);
  }

  auto ccfg = cfg.controller;
  ccfg.target_accuracy = target;
  const int m = ccfg.rounds;
  const int n = ccfg.rollouts_per_round;

  ControllerRun out{{}, RoundStats(m), {}};
  BatchSchedule schedule(pop.problems.size(), static_cast<std::size_t>(cfg.batch_size), seed);

  for (long step = 0; step < cfg.steps; ++step) {
    long epoch = 0;
    const auto batch = schedule.next(epoch);
    std::vector<double> acc_sum(static_cast<std::size_t>(m), 0.0);
    std::vector<double> rate_sum(static_cast<std::size_t>(m), 0.0);
    for (std::size_t idx : batch) {
      auto& problem = pop.problems[idx];
      const auto& learner = pop.learners[idx];
      auto sampler = [&](const controller::HintPlan& plan) {
        Rng rng = make_stream(learner.seed, {static_cast<std::uint64_t>(step),
                                             static_cast<std::uint64_t>(plan.round)});
        // The learner sees the hint actually shown, l / |y|.
        const double shown = static_cast<double>(plan.hint_length) /
                             static_cast<double>(problem.solution.size());
        return sim::oracle_rollouts(learner, shown, n, rng);
      };
      const auto outcome = controller::run_rounds(problem, ccfg, cfg.fit, step, sampler);
      for (int i = 0; i < m; ++i) {
        acc_sum[static_cast<std::size_t>(i)] += outcome.accuracies[static_cast<std::size_t>(i)];
        rate_sum[static_cast<std::size_t>(i)] += outcome.plans[static_cast<std::size_t>(i)].rate;
      }
      if (trace) {
        for (const auto& rec : outcome.trace) trace->write(trace_json(rec));
      }
    }
    const auto bsz = static_cast<double>(batch.size());
    std::vector<double> round_acc, round_rate;
    double reward = 0.0;
    for (int i = 0; i < m; ++i) {
      round_acc.push_back(acc_sum[static_cast<std::size_t>(i)] / bsz);
      round_rate.push_back(rate_sum[static_cast<std::size_t>(i)] / bsz);
      reward += round_acc.back() / m;
    }
    ordered_json row;
    row["step"] = step;
    row["epoch"] = epoch;
    row["target"] = target;
    row["reward_mean"] = reward;
    row["round_accuracy"] = round_acc;
    row["round_rate"] = round_rate;
    out.metrics.push_back(std::move(row));
    if (epoch >= 1) out.stats.add(round_acc, target);

    for (auto& l : pop.learners) l = sim::drift(l, cfg.fit.bounds);
  }
  out.problems = std::move(pop.problems);
  return out;
}

double mean_zero_hint_accuracy(const sim::TabularPolicy& policy,
                               const std::vector<controller::Problem>& problems) {
  double total = 0.0;
  for (const auto& p : problems) total += sim::exact_accuracy(policy, sim::task_from_problem(p), 0);
  return total / static_cast<double>(problems.size());
}

std::string finish(const ExperimentConfig& cfg, RunResult& result) {
  const auto dir = cfg.output_dir;
  std::sort(result.files.begin(), result.files.end());
  ordered_json manifest;
  manifest["config_hash"] = result.config_hash;
  manifest["seed"] = *cfg.seed;
  manifest["version"] = SCAFFOLD_VERSION;
  manifest["files"] = ordered_json::array();
  for (const auto& f : result.files) {
    ordered_json e;
    e["name"] = f;
    e["sha256"] = sha256_file(dir / f);
    e["bytes"] = std::filesystem::file_size(dir / f);
    manifest["files"].push_back(e);
  }
  const auto text = manifest.dump(2) + "\n";
  write_text(dir / "manifest.json", text);
  return text;
}

}  // namespace

std::string to_string(Mode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

Mode mode_from_string(const std::string& name) {
  for (const auto& [m, n] : kModeNames) {
    if (name == n) return m;
  }
  throw ConfigError("unknown mode '" + name +
                    "' (expected controller-only, hinted, grpo-baseline, theory-sweep, target-sweep)");
}

void ExperimentConfig::validate() const {
  if (!seed) throw ConfigError("a seed is required");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  controller.validate();
  loss.validate();
  try {
    fit.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (policy_window < 0) throw ConfigError("policy window must be >= 0");
  if (extra_length < 0) throw ConfigError("extra_length must be >= 0");
  if (mode == Mode::TargetSweep && sweep_denominator < 4) {
    throw ConfigError("target-sweep denominator must be >= 4");
  }
  if (mode == Mode::TheorySweep) {
    if (theory_grid.size() < 5) throw ConfigError("theory-sweep needs at least 5 accuracy levels");
    for (double a : theory_grid) {
      if (!(a > 0.0 && a < 1.0)) throw ConfigError("theory-sweep accuracies must lie in (0, 1)");
    }
    if (theory_betas.empty()) throw ConfigError("theory-sweep needs at least one beta");
    for (double b : theory_betas) {
      if (!(b > 0.0)) throw ConfigError("theory-sweep betas must be positive");
    }
  }
}

ExperimentConfig default_config(Mode mode) {
  ExperimentConfig cfg;
  cfg.mode = mode;
  // The margin points favour the steepest admissible curve when few rates
  // have been seen; capping k near the learners' slopes damps the controller.
  cfg.fit.bounds.k_max = 20.0;
  switch (mode) {
    case Mode::ControllerOnly:
      cfg.steps = 200;
      // Capability grows ~0.8 in mu over 200 steps while a* stays reachable.
      cfg.population.mu_min = -1.0;
      cfg.population.mu_max = -0.95;
      cfg.population.drift_min = 0.0035;
      cfg.population.drift_max = 0.0045;
      break;
    case Mode::TargetSweep:
      cfg.steps = 200;
      break;
    case Mode::Hinted:
    case Mode::GrpoBaseline:
      cfg.steps = 400;
      cfg.batch_size = 8;
      cfg.loss.learning_rate = 20.0;  // plain gradient descent on a 1/(P|G|)-scaled loss
      break;
    case Mode::TheorySweep:
      cfg.steps = 1;
      for (int i = 1; i <= 19; ++i) cfg.theory_grid.push_back(0.05 * i);
      cfg.theory_betas = {100.0, 0.001};
      break;
  }
  return cfg;
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["temperature"] = c.temperature;
  j["task_set"] = c.task_set ? json(c.task_set->string()) : json(nullptr);
  j["controller"] = {{"rounds", c.controller.rounds},
                     {"rollouts_per_round", c.controller.rollouts_per_round},
                     {"target_accuracy", c.controller.target_accuracy},
                     {"epoch_persistence", c.controller.epoch_persistence}};
  j["loss"] = {{"beta", c.loss.beta},
               {"gamma", c.loss.gamma},
               {"epsilon", c.loss.epsilon},
               {"iterations", c.loss.iterations},
               {"learning_rate", c.loss.learning_rate},
               {"imitation", c.loss.imitation == rl::ImitationForm::LogLikelihood
                                 ? "log-likelihood"
                                 : "probability"}};
  const auto& b = c.fit.bounds;
  j["fit"] = {{"k_min", b.k_min},
              {"k_max", b.k_max},
              {"mu_min", b.mu_min},
              {"mu_max", b.mu_max},
              {"b_min", b.b_min},
              {"b_max", b.b_max},
              {"max_iterations", c.fit.max_iterations},
              {"gradient_tolerance", c.fit.gradient_tolerance},
              {"step_tolerance", c.fit.step_tolerance}};
  const auto& p = c.population;
  j["population"] = {{"count", p.count},         {"k_min", p.k_min},
                     {"k_max", p.k_max},         {"mu_min", p.mu_min},
                     {"mu_max", p.mu_max},       {"b_min", p.b_min},
                     {"b_max", p.b_max},         {"drift_min", p.drift_min},
                     {"drift_max", p.drift_max}, {"solution_min", p.solution_min},
                     {"solution_max", p.solution_max}};
  j["family"] = {{"count", c.family.count},
                 {"vocab_size", c.family.vocab_size},
                 {"length", c.family.length},
                 {"step_tokens", c.family.step_tokens}};
  j["policy"] = {{"window", c.policy_window}, {"extra_length", c.extra_length}};
  j["target_sweep"] = {{"denominator", c.sweep_denominator}};
  j["theory"] = {{"grid", c.theory_grid}, {"betas", c.theory_betas}};
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& json_text, ExperimentConfig c) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("seed") && !j.at("seed").is_null()) {
    std::uint64_t s = 0;
    overlay(j, "seed", s);
    c.seed = s;
  }
  overlay(j, "steps", c.steps);
  overlay(j, "batch_size", c.batch_size);
  overlay(j, "temperature", c.temperature);
  if (j.contains("task_set") && !j.at("task_set").is_null()) {
    c.task_set = j.at("task_set").get<std::string>();
  }
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();

  const auto& ctl = section(j, "controller");
  overlay(ctl, "rounds", c.controller.rounds);
  overlay(ctl, "rollouts_per_round", c.controller.rollouts_per_round);
  overlay(ctl, "target_accuracy", c.controller.target_accuracy);
  overlay(ctl, "epoch_persistence", c.controller.epoch_persistence);

  const auto& loss = section(j, "loss");
  overlay(loss, "beta", c.loss.beta);
  overlay(loss, "gamma", c.loss.gamma);
  overlay(loss, "epsilon", c.loss.epsilon);
  overlay(loss, "iterations", c.loss.iterations);
  overlay(loss, "learning_rate", c.loss.learning_rate);
  if (loss.contains("imitation")) {
    const auto form = loss.at("imitation").get<std::string>();
    if (form == "log-likelihood") {
      c.loss.imitation = rl::ImitationForm::LogLikelihood;
    } else if (form == "probability") {
      c.loss.imitation = rl::ImitationForm::Probability;
    } else {
      throw ConfigError("loss.imitation must be 'log-likelihood' or 'probability'");
    }
  }

  const auto& fit = section(j, "fit");
  auto& b = c.fit.bounds;
  overlay(fit, "k_min", b.k_min);
  overlay(fit, "k_max", b.k_max);
  overlay(fit, "mu_min", b.mu_min);
  overlay(fit, "mu_max", b.mu_max);
  overlay(fit, "b_min", b.b_min);
  overlay(fit, "b_max", b.b_max);
  overlay(fit, "max_iterations", c.fit.max_iterations);
  overlay(fit, "gradient_tolerance", c.fit.gradient_tolerance);
  overlay(fit, "step_tolerance", c.fit.step_tolerance);

  const auto& pop = section(j, "population");
  auto& p = c.population;
  overlay(pop, "count", p.count);
  overlay(pop, "k_min", p.k_min);
  overlay(pop, "k_max", p.k_max);
  overlay(pop, "mu_min", p.mu_min);
  overlay(pop, "mu_max", p.mu_max);
  overlay(pop, "b_min", p.b_min);
  overlay(pop, "b_max", p.b_max);
  overlay(pop, "drift_min", p.drift_min);
  overlay(pop, "drift_max", p.drift_max);
  overlay(pop, "solution_min", p.solution_min);
  overlay(pop, "solution_max", p.solution_max);

  const auto& fam = section(j, "family");
  overlay(fam, "count", c.family.count);
  overlay(fam, "vocab_size", c.family.vocab_size);
  overlay(fam, "length", c.family.length);
  overlay(fam, "step_tokens", c.family.step_tokens);

  const auto& pol = section(j, "policy");
  overlay(pol, "window", c.policy_window);
  overlay(pol, "extra_length", c.extra_length);

  overlay(section(j, "target_sweep"), "denominator", c.sweep_denominator);
  const auto& th = section(j, "theory");
  overlay(th, "grid", c.theory_grid);
  overlay(th, "betas", c.theory_betas);
  return c;
}

BatchSchedule::BatchSchedule(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : size_(dataset_size), batch_(std::min(batch_size, dataset_size)), seed_(seed) {
  if (size_ == 0 || batch_ == 0) throw ConfigError("batch schedule: empty dataset or batch");
}

void BatchSchedule::reshuffle() {
  ++epoch_;
  order_.resize(size_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  Rng rng = make_stream(seed_, {0x65706f6368ULL, static_cast<std::uint64_t>(epoch_)});
  for (std::size_t i = size_ - 1; i > 0; --i) {
    std::swap(order_[i], order_[static_cast<std::size_t>(rng() % (i + 1))]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> BatchSchedule::next(long& epoch) {
  if (epoch_ < 0 || cursor_ >= size_) reshuffle();
  const std::size_t end = std::min(cursor_ + batch_, size_);
  std::vector<std::size_t> out(order_.begin() + static_cast<long>(cursor_),
                               order_.begin() + static_cast<long>(end));
  cursor_ = end;
  epoch = epoch_;
  return out;
}

RunResult run(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& dir = cfg.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());

  RunResult result;
  result.output_dir = dir;
  const auto config_text = config_to_json(cfg);
  result.config_hash = sha256_hex(config_text);
  write_text(dir / "config.json", config_text);
  result.files = {"config.json", "metrics.jsonl", "trace.jsonl", "summary.json"};

  JsonlWriter metrics(dir / "metrics.jsonl");
  JsonlWriter trace(dir / "trace.jsonl");
  ordered_json summary;
  summary["mode"] = to_string(cfg.mode);
  summary["seed"] = *cfg.seed;

  switch (cfg.mode) {
    case Mode::ControllerOnly: {
      auto res = run_controller(cfg, cfg.controller.target_accuracy, true, &trace);
      for (const auto& row : res.metrics) metrics.write(row);
      summary["target"] = cfg.controller.target_accuracy;
      summary["rounds"] = res.stats.to_json();
      save_tasks(dir / "tasks_final.jsonl", res.problems);
      result.files.push_back("tasks_final.jsonl");
      break;
    }
    case Mode::TargetSweep: {
      JsonlWriter sweep(dir / "target_sweep.jsonl");
      result.files.push_back("target_sweep.jsonl");
      const int n = cfg.sweep_denominator;
      summary["targets"] = ordered_json::array();
      for (int i = 2; i <= n - 2; ++i) {
        const double target = static_cast<double>(i) / n;
        auto res = run_controller(cfg, target, false, nullptr);
        for (const auto& row : res.metrics) metrics.write(row);
        auto stats = res.stats.to_json();
        ordered_json row;
        row["target"] = target;
        row["post_epoch_steps"] = stats["post_epoch_steps"];
        row["converged_final_round_accuracy"] = stats["round_accuracy"].back();
        row["round_accuracy"] = stats["round_accuracy"];
        row["round_deviation"] = stats["round_deviation"];
        sweep.write(row);
        summary["targets"].push_back(row);
      }
      break;
    }
    case Mode::Hinted:
    case Mode::GrpoBaseline: {
      auto problems = cfg.task_set ? load_tasks(*cfg.task_set)
                                   : sim::make_arithmetic_family(cfg.family, *cfg.seed);
      if (problems.empty()) throw DataError("task set is empty");
      int max_token = 0;
      std::size_t max_len = 0;
      for (const auto& p : problems) {
        for (int t : p.prompt) max_token = std::max(max_token, t);
        for (int t : p.solution) max_token = std::max(max_token, t);
        max_len = std::max(max_len, p.solution.size());
      }
      sim::PolicyShape shape;
      shape.vocab_size = cfg.task_set ? max_token + 1 : cfg.family.vocab_size;
      shape.terminator = true;
      shape.max_length = static_cast<int>(max_len) + cfg.extra_length;
      shape.window = cfg.policy_window;
      sim::TabularPolicy policy(shape);
      const sim::PolicySnapshot reference = policy;

      rl::TrainSettings settings;
      settings.mode = cfg.mode == Mode::Hinted ? rl::TrainingMode::Hinted : rl::TrainingMode::GrpoBaseline;
      settings.controller = cfg.controller;
      settings.fit = cfg.fit;
      settings.loss = cfg.loss;
      settings.temperature = cfg.temperature;
      settings.seed = *cfg.seed;

      const double initial = mean_zero_hint_accuracy(policy, problems);
      double best = initial;
      double final_acc = initial;
      BatchSchedule schedule(problems.size(), static_cast<std::size_t>(cfg.batch_size), *cfg.seed);
      for (long step = 0; step < cfg.steps; ++step) {
        long epoch = 0;
        const auto batch = schedule.next(epoch);
        const auto res = rl::train_step(problems, batch, policy, reference, settings, step);
        final_acc = mean_zero_hint_accuracy(policy, problems);
        best = std::max(best, final_acc);
        const auto& m = res.metrics;
        ordered_json row;
        row["step"] = step;
        row["epoch"] = epoch;
        row["reward_mean"] = m.reward_mean;
        row["length_mean"] = m.length_mean;
        row["hint_rate_mean"] = m.hint_rate_mean;
        row["loss_policy"] = m.loss_policy;
        row["loss_kl"] = m.loss_kl;
        row["loss_imitation"] = m.loss_imitation;
        row["loss_total"] = m.loss_total;
        row["zero_hint_accuracy"] = final_acc;
        metrics.write(row);
        for (const auto& rec : res.trace) trace.write(trace_json(rec));
      }
      summary["initial_zero_hint_accuracy"] = initial;
      summary["final_zero_hint_accuracy"] = final_acc;
      summary["best_zero_hint_accuracy"] = best;
      save_tasks(dir / "tasks_final.jsonl", problems);
      result.files.push_back("tasks_final.jsonl");
      break;
    }
    case Mode::TheorySweep: {
      JsonlWriter sweep(dir / "theory_sweep.jsonl");
      result.files.push_back("theory_sweep.jsonl");
      summary["sweeps"] = ordered_json::array();
      for (double beta : cfg.theory_betas) {
        const auto rows = theory::descent_vs_accuracy_sweep(cfg.theory_grid, beta);
        std::size_t argmax = 0;
        bool all_within = true;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const auto& r = rows[i];
          const bool small = r.step_norm <= theory::kSmallStepNorm;
          const bool within = r.realized <= r.bound + theory::taylor_tolerance(r.bound);
          if (small && !within) all_within = false;
          if (r.realized > rows[argmax].realized) argmax = i;
          ordered_json row;
          row["beta"] = beta;
          row["accuracy"] = r.accuracy;
          row["realized"] = r.realized;
          row["bound"] = r.bound;
          row["quadratic"] = r.quadratic;
          row["gap"] = r.bound - r.realized;
          row["step_norm"] = r.step_norm;
          row["small_step"] = small;
          row["within_bound"] = within;
          sweep.write(row);
          metrics.write(row);
        }
        ordered_json s;
        s["beta"] = beta;
        s["argmax_accuracy"] = rows.empty() ? 0.0 : rows[argmax].accuracy;
        s["small_step_rows_within_bound"] = all_within;
        summary["sweeps"].push_back(s);
      }
      break;
    }
  }

  metrics.close();
  trace.close();
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  finish(cfg, result);
  return result;
}

}  // namespace scaffold::harness
