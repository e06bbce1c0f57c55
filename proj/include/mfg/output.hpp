#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfg/model.hpp"

namespace mfg::io {

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double v);

/// Header `t,<prefix>_1_1,...,<prefix>_n_m`, states flattened row-major with 1-based labels.
std::string trajectory_header(int n, int m, const std::string& prefix = "x");

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<double>& times,
                          const std::vector<Matrix>& states, const std::string& prefix = "x");

/// Aggregate ensemble table: t, mean_i_j..., stderr_i_j...
void write_ensemble_csv(const std::filesystem::path& path, const std::vector<double>& times,
                        const std::vector<Matrix>& mean, const std::vector<Matrix>& std_error);

/// Reads one state in trajectory row format. Accepts an optional header line and an
/// optional leading t column. Throws ConfigError on shape or number errors.
Matrix read_state_row(const std::filesystem::path& path, int n, int m);

struct TrajectoryTable {
  std::vector<double> times;
  std::vector<Matrix> states;
};

/// Reads a CSV written by write_trajectory_csv (any prefix).
TrajectoryTable read_trajectory_csv(const std::filesystem::path& path, int n, int m);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

nlohmann::json manifest(const std::string& config_hash, const std::vector<std::string>& command_line);

}  // namespace mfg::io
