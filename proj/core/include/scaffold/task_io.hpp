#pragma once

#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "scaffold/hint_controller.hpp"

namespace scaffold::harness {

// Task-set files hold one JSON object per line:
//
//   {"id": "p1", "prompt": [3, 1], "solution": [4, 5, 6, 7, 8],
//    "step_boundaries": [2, 5], "persisted_rate": 0.4}
//
// persisted_rate may be null or omitted. Blank lines are ignored.

/// Throws DataError naming the line (and record id when known) for
/// malformed JSON, duplicate ids, empty solutions, step boundaries that are
/// not strictly increasing within [1, |solution|], negative tokens or a
/// persisted rate outside [0, 1].
std::vector<controller::Problem> parse_tasks(std::istream& in, const std::string& source);
std::vector<controller::Problem> load_tasks(const std::filesystem::path& path);

std::string serialize_task(const controller::Problem& problem);
void save_tasks(const std::filesystem::path& path, std::span<const controller::Problem> problems);

}  // namespace scaffold::harness
