#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace scaffold::harness {

/// Renders tab-separated series from a run directory into `out_dir`:
///   reward_vs_step.tsv, round_accuracy_vs_step.tsv, target_sweep.tsv and
///   bound_sweep.tsv. Series absent from the run produce header-only files.
/// Returns the written file names. Throws DataError on unreadable input.
std::vector<std::string> emit_plots(const std::filesystem::path& run_dir,
                                    const std::filesystem::path& out_dir);

}  // namespace scaffold::harness
