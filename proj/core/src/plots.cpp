#include "scaffold/plots.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "scaffold/errors.hpp"

namespace scaffold::harness {
namespace {

using nlohmann::json;

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> rows;
  if (!std::filesystem::exists(path)) return rows;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string num(const json& v) {
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return num(v.get<double>());
  return "nan";
}

class Table {
 public:
  Table(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "\t" : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

std::string series_of(const json& row) {
  return row.contains("target") ? num(row.at("target")) : std::string("run");
}

}  // namespace

std::vector<std::string> emit_plots(const std::filesystem::path& run_dir,
                                    const std::filesystem::path& out_dir) {
  if (!std::filesystem::is_directory(run_dir)) {
    throw DataError("run directory not found: " + run_dir.string());
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  int rounds = 0;
  const auto config_path = run_dir / "config.json";
  if (std::filesystem::exists(config_path)) {
    std::ifstream in(config_path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      rounds = json::parse(ss.str()).at("controller").at("rounds").get<int>();
    } catch (const json::exception& e) {
      throw DataError("config.json: " + std::string(e.what()));
    }
  }

  const auto metrics = read_jsonl(run_dir / "metrics.jsonl");

  {
    Table t(out_dir / "reward_vs_step.tsv", {"series", "step", "reward_mean"});
    for (const auto& r : metrics) {
      if (r.contains("step") && r.contains("reward_mean")) {
        t.row({series_of(r), num(r.at("step")), num(r.at("reward_mean"))});
      }
    }
  }

  {
    std::vector<std::string> header{"series", "step"};
    for (int i = 1; i <= rounds; ++i) header.push_back("round_" + std::to_string(i));
    Table t(out_dir / "round_accuracy_vs_step.tsv", header);
    bool any = false;
    for (const auto& r : metrics) {
      if (!r.contains("round_accuracy")) continue;
      any = true;
      std::vector<std::string> cells{series_of(r), num(r.at("step"))};
      for (const auto& v : r.at("round_accuracy")) cells.push_back(num(v));
      t.row(cells);
    }
    if (!any) {
      // Training runs: average the per-problem trace by (step, round).
      std::map<long, std::vector<std::pair<double, int>>> acc;
      for (const auto& r : read_jsonl(run_dir / "trace.jsonl")) {
        const long step = r.at("step").get<long>();
        const int round = r.at("round").get<int>();
        auto& v = acc[step];
        if (static_cast<int>(v.size()) < round) v.resize(static_cast<std::size_t>(round));
        v[static_cast<std::size_t>(round - 1)].first += r.at("accuracy").get<double>();
        v[static_cast<std::size_t>(round - 1)].second += 1;
      }
      for (const auto& [step, v] : acc) {
        std::vector<std::string> cells{"run", std::to_string(step)};
        for (const auto& [sum, count] : v) cells.push_back(count ? num(sum / count) : "nan");
        t.row(cells);
      }
    }
  }

  {
    // step x target grid of final-round batch accuracy.
    std::map<long, std::map<double, double>> grid;
    std::map<double, bool> targets;
    for (const auto& r : metrics) {
      if (!r.contains("target") || !r.contains("round_accuracy")) continue;
      const double target = r.at("target").get<double>();
      targets[target] = true;
      grid[r.at("step").get<long>()][target] = r.at("round_accuracy").back().get<double>();
    }
    const bool sweep = std::filesystem::exists(run_dir / "target_sweep.jsonl");
    std::vector<std::string> header{"step"};
    if (sweep) {
      for (const auto& [target, _] : targets) header.push_back("target_" + num(target));
    }
    Table t(out_dir / "target_sweep.tsv", header);
    if (sweep) {
      for (const auto& [step, row] : grid) {
        std::vector<std::string> cells{std::to_string(step)};
        for (const auto& [target, _] : targets) {
          const auto it = row.find(target);
          cells.push_back(it == row.end() ? "nan" : num(it->second));
        }
        t.row(cells);
      }
    }
  }

  {
    Table t(out_dir / "bound_sweep.tsv", {"beta", "accuracy", "realized", "bound", "quadratic"});
    for (const auto& r : read_jsonl(run_dir / "theory_sweep.jsonl")) {
      t.row({num(r.at("beta")), num(r.at("accuracy")), num(r.at("realized")), num(r.at("bound")),
             num(r.at("quadratic"))});
    }
  }

  return {"reward_vs_step.tsv", "round_accuracy_vs_step.tsv", "target_sweep.tsv",
          "bound_sweep.tsv"};
}

}  // namespace scaffold::harness
