#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "epsel/experiment.hpp"

namespace epsel {

/// Full result set, config echo included.
nlohmann::json to_json(const ResultSet& rs);

/// Per-iteration, per-trial rows followed by a blank line and an aggregate
/// block. se and sweep results have their own column sets.
std::string render_csv(const ResultSet& rs);
std::string render_json(const ResultSet& rs);
/// Iteration vs. MSE line chart: MC mean with a +-std band and the SE overlay.
std::string render_svg(const ResultSet& rs);

/// `{mode}_{timestamp}_{seed}.{ext}`
std::string report_file_name(const ResultSet& rs, OutputFormat format);

/// Writes one file per requested format into `dir` (created if needed) and
/// returns the paths. An empty format list writes nothing and logs a warning.
std::vector<std::filesystem::path> emit_report(const ResultSet& rs,
                                               const std::vector<OutputFormat>& formats,
                                               const std::filesystem::path& dir);

}  // namespace epsel
