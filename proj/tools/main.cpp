#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scaffold/errors.hpp"
#include "scaffold/experiment.hpp"
#include "scaffold/plots.hpp"
#include "scaffold/task_io.hpp"

namespace {

using namespace scaffold;

std::string default_output_dir() {
  if (const char* env = std::getenv("SCAFFOLD_OUTPUT_DIR"); env && *env) return env;
  return "scaffold_out";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunFlags {
  std::string mode;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string task_set;
  long steps = 0;
  double target = 0.0;
  int rounds = 0;
  int rollouts = 0;
  int batch_size = 0;
  double learning_rate = 0.0;
  double beta = -1.0;
  double gamma = -1.0;
};

int do_run(const RunFlags& f, const CLI::App& cmd) {
  auto given = [&](const char* name) { return cmd.count(name) > 0; };

  // Mode first so its defaults form the base the config file overlays.
  harness::Mode mode = harness::Mode::ControllerOnly;
  std::string file_text;
  if (!f.config_path.empty()) file_text = read_file(f.config_path);
  if (given("--mode")) {
    mode = harness::mode_from_string(f.mode);
  } else if (!file_text.empty()) {
    mode = harness::config_from_json(file_text, harness::default_config(mode)).mode;
  }
  auto cfg = harness::default_config(mode);
  if (!file_text.empty()) cfg = harness::config_from_json(file_text, cfg);
  cfg.mode = mode;

  cfg.seed = f.seed;
  cfg.output_dir = given("--output-dir") ? f.output_dir : default_output_dir();
  if (given("--task-set")) cfg.task_set = f.task_set;
  if (given("--steps")) cfg.steps = f.steps;
  if (given("--target")) cfg.controller.target_accuracy = f.target;
  if (given("--rounds")) cfg.controller.rounds = f.rounds;
  if (given("--rollouts")) cfg.controller.rollouts_per_round = f.rollouts;
  if (given("--batch-size")) cfg.batch_size = f.batch_size;
  if (given("--learning-rate")) cfg.loss.learning_rate = f.learning_rate;
  if (given("--beta")) cfg.loss.beta = f.beta;
  if (given("--gamma")) cfg.loss.gamma = f.gamma;

  const auto result = harness::run(cfg);
  std::cout << "mode " << harness::to_string(cfg.mode) << " seed " << *cfg.seed << "\n"
            << "output " << result.output_dir.string() << "\n"
            << "config_hash " << result.config_hash << "\n";
  for (const auto& name : result.files) std::cout << "  " << name << "\n";
  return exit_code::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hint-scaffolding controller experiments"};
  app.require_subcommand(1);

  RunFlags flags;
  auto* run = app.add_subcommand("run", "Run an experiment and write its artifacts");
  run->add_option("--mode", flags.mode,
                  "controller-only | hinted | grpo-baseline | theory-sweep | target-sweep");
  run->add_option("--config", flags.config_path, "JSON config file; flags override its fields")
      ->check(CLI::ExistingFile);
  run->add_option("--seed", flags.seed, "Random seed")->required();
  run->add_option("--output-dir", flags.output_dir,
                  "Output directory (default: $SCAFFOLD_OUTPUT_DIR or scaffold_out)");
  run->add_option("--task-set", flags.task_set, "JSONL task file")->check(CLI::ExistingFile);
  run->add_option("--steps", flags.steps, "Training steps");
  run->add_option("--target", flags.target, "Target accuracy a*");
  run->add_option("--rounds", flags.rounds, "Rounds per step (m)");
  run->add_option("--rollouts", flags.rollouts, "Rollouts per round (n)");
  run->add_option("--batch-size", flags.batch_size, "Problems per step");
  run->add_option("--learning-rate", flags.learning_rate, "Policy learning rate");
  run->add_option("--beta", flags.beta, "KL coefficient");
  run->add_option("--gamma", flags.gamma, "Imitation coefficient");

  std::string tasks_path;
  auto* validate = app.add_subcommand("validate-tasks", "Parse and check a task file");
  validate->add_option("tasks", tasks_path, "JSONL task file")->required();

  std::string run_dir, plot_dir;
  auto* plots = app.add_subcommand("emit-plots", "Write TSV plot data for a finished run");
  plots->add_option("run_dir", run_dir, "Run output directory")->required();
  plots->add_option("--out", plot_dir, "Destination (default: <run_dir>/plots)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_code::kOk : exit_code::kConfig;
  }

  try {
    if (*run) return do_run(flags, *run);
    if (*validate) {
      const auto problems = harness::load_tasks(tasks_path);
      std::cout << tasks_path << ": " << problems.size() << " problems ok\n";
      return exit_code::kOk;
    }
    if (*plots) {
      const std::filesystem::path out = plot_dir.empty() ? std::filesystem::path(run_dir) / "plots"
                                                         : std::filesystem::path(plot_dir);
      for (const auto& name : harness::emit_plots(run_dir, out)) {
        std::cout << (out / name).string() << "\n";
      }
      return exit_code::kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_code::kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_code::kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return exit_code::kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return exit_code::kInternal;
  }
  return exit_code::kInternal;
}
