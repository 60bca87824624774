#pragma once

#include <string>
#include <vector>

namespace emix {

/// Renders one SVG line plot per metric column from a set of metrics CSVs
/// (typically one per seed): per-step mean curve plus a min-max band. Columns
/// with no finite data are skipped with a warning on stderr. Returns the list
/// of files written.
std::vector<std::string> emit_plots(const std::vector<std::string>& metrics_files,
                                    const std::string& out_dir);

}  // namespace emix
