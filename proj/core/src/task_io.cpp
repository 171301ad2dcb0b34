#include "scaffold/task_io.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

#include "scaffold/errors.hpp"

namespace scaffold::harness {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& source, long line, const std::string& id,
                       const std::string& what) {
  std::ostringstream msg;
  msg << source << ":" << line << ": ";
  if (!id.empty()) msg << "record '" << id << "': ";
  msg << what;
  throw DataError(msg.str());
}

std::vector<int> read_tokens(const json& rec, const char* key, bool required,
                             const std::string& source, long line, const std::string& id) {
  if (!rec.contains(key)) {
    if (required) fail(source, line, id, std::string("missing '") + key + "'");
    return {};
  }
  const auto& arr = rec.at(key);
  if (!arr.is_array()) fail(source, line, id, std::string("'") + key + "' must be an array");
  std::vector<int> out;
  for (const auto& v : arr) {
    if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() > 1'000'000) {
      fail(source, line, id, std::string("'") + key + "' holds an invalid token");
    }
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace

std::vector<controller::Problem> parse_tasks(std::istream& in, const std::string& source) {
  std::vector<controller::Problem> out;
  std::map<std::string, long> seen;
  std::string text;
  long line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(source, line, "", std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object()) fail(source, line, "", "record must be a JSON object");
    if (!rec.contains("id") || !rec.at("id").is_string() || rec.at("id").get<std::string>().empty()) {
      fail(source, line, "", "missing or empty 'id'");
    }
    controller::Problem p;
    p.id = rec.at("id").get<std::string>();
    if (const auto it = seen.find(p.id); it != seen.end()) {
      fail(source, line, p.id, "duplicate id (first seen on line " + std::to_string(it->second) + ")");
    }
    seen.emplace(p.id, line);

    p.prompt = read_tokens(rec, "prompt", true, source, line, p.id);
    p.solution = read_tokens(rec, "solution", true, source, line, p.id);
    if (p.solution.empty()) fail(source, line, p.id, "empty solution");

    const auto bounds = read_tokens(rec, "step_boundaries", false, source, line, p.id);
    std::size_t prev = 0;
    for (int b : bounds) {
      const auto ub = static_cast<std::size_t>(b);
      if (ub == 0 || ub > p.solution.size()) {
        fail(source, line, p.id,
             "step boundary " + std::to_string(b) + " out of range for solution length " +
                 std::to_string(p.solution.size()));
      }
      if (ub <= prev) fail(source, line, p.id, "step boundaries must be strictly increasing");
      prev = ub;
      p.step_boundaries.push_back(ub);
    }

    if (rec.contains("persisted_rate") && !rec.at("persisted_rate").is_null()) {
      const auto& r = rec.at("persisted_rate");
      if (!r.is_number()) fail(source, line, p.id, "persisted_rate must be a number or null");
      const double rate = r.get<double>();
      if (!(rate >= 0.0 && rate <= 1.0)) {
        fail(source, line, p.id, "persisted_rate outside [0, 1]");
      }
      p.persisted_rate = rate;
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<controller::Problem> load_tasks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open task set " + path.string());
  return parse_tasks(in, path.string());
}

std::string serialize_task(const controller::Problem& problem) {
  json rec;
  rec["id"] = problem.id;
  rec["prompt"] = problem.prompt;
  rec["solution"] = problem.solution;
  rec["step_boundaries"] = problem.step_boundaries;
  rec["persisted_rate"] = problem.persisted_rate ? json(*problem.persisted_rate) : json(nullptr);
  return rec.dump();
}

void save_tasks(const std::filesystem::path& path, std::span<const controller::Problem> problems) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write task set " + path.string());
  for (const auto& p : problems) out << serialize_task(p) << '\n';
}

}  // namespace scaffold::harness
