#include "mfg/output.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifndef MFG_VERSION
#define MFG_VERSION "dev"
#endif

namespace mfg::io {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trajectory_header(int n, int m, const std::string& prefix) {
  std::string h = "t";
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= m; ++j) h += "," + prefix + "_" + std::to_string(i) + "_" + std::to_string(j);
  return h;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void append_row(std::string& line, const Matrix& a) {
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) line += "," + format_double(a(i, j));
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<double>& times,
                          const std::vector<Matrix>& states, const std::string& prefix) {
  if (times.size() != states.size()) throw std::invalid_argument("write_trajectory_csv: size mismatch");
  auto out = open_out(path);
  const int n = states.empty() ? 0 : static_cast<int>(states[0].rows());
  const int m = states.empty() ? 0 : static_cast<int>(states[0].cols());
  out << trajectory_header(n, m, prefix) << '\n';
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::string line = format_double(times[k]);
    append_row(line, states[k]);
    out << line << '\n';
  }
}

void write_ensemble_csv(const std::filesystem::path& path, const std::vector<double>& times,
                        const std::vector<Matrix>& mean, const std::vector<Matrix>& std_error) {
  if (times.size() != mean.size() || times.size() != std_error.size())
    throw std::invalid_argument("write_ensemble_csv: size mismatch");
  auto out = open_out(path);
  const int n = mean.empty() ? 0 : static_cast<int>(mean[0].rows());
  const int m = mean.empty() ? 0 : static_cast<int>(mean[0].cols());
  std::string header = trajectory_header(n, m, "mean");
  header += trajectory_header(n, m, "stderr").substr(1);
  out << header << '\n';
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::string line = format_double(times[k]);
    append_row(line, mean[k]);
    append_row(line, std_error[k]);
    out << line << '\n';
  }
}

namespace {

// Data rows of a CSV file, without blank lines and without a leading header.
std::vector<std::string> data_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    rows.push_back(line);
  }
  if (!rows.empty() && std::isalpha(static_cast<unsigned char>(rows.front()[0]))) rows.erase(rows.begin());
  return rows;
}

std::vector<double> parse_row(const std::string& row, const std::filesystem::path& path, std::size_t line) {
  std::vector<double> values;
  std::stringstream ss(row);
  for (std::string cell; std::getline(ss, cell, ',');) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    const std::string s = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ConfigError(path.string() + ": data row " + std::to_string(line) + ", column " +
                        std::to_string(values.size() + 1) + ": not a number '" + s + "'");
    values.push_back(v);
  }
  return values;
}

}  // namespace

TrajectoryTable read_trajectory_csv(const std::filesystem::path& path, int n, int m) {
  const auto rows = data_rows(path);
  TrajectoryTable table;
  const std::size_t want = static_cast<std::size_t>(n) * m + 1;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto values = parse_row(rows[r], path, r + 1);
    if (values.size() != want)
      throw ConfigError(path.string() + ": data row " + std::to_string(r + 1) + ": expected " +
                        std::to_string(want) + " columns, got " + std::to_string(values.size()));
    if (!table.times.empty() && !(values[0] > table.times.back()))
      throw ConfigError(path.string() + ": times must increase (data row " + std::to_string(r + 1) + ")");
    table.times.push_back(values[0]);
    Matrix a(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) a(i, j) = values[1 + static_cast<std::size_t>(i) * m + j];
    table.states.push_back(std::move(a));
  }
  return table;
}

Matrix read_state_row(const std::filesystem::path& path, int n, int m) {
  const auto rows = data_rows(path);
  if (rows.size() != 1)
    throw ConfigError(path.string() + ": expected exactly one data row, found " + std::to_string(rows.size()));
  const auto values = parse_row(rows.front(), path, 1);
  const std::size_t want = static_cast<std::size_t>(n) * m;
  std::size_t offset = 0;
  if (values.size() == want + 1) {
    offset = 1;
  } else if (values.size() != want) {
    throw ConfigError(path.string() + ": expected " + std::to_string(want) + " values (optionally after t), got " +
                      std::to_string(values.size()));
  }
  Matrix a(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = values[offset + static_cast<std::size_t>(i) * m + j];
  return a;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

nlohmann::json manifest(const std::string& config_hash, const std::vector<std::string>& command_line) {
  return {{"tool", "mfg"}, {"version", MFG_VERSION}, {"config_hash", config_hash}, {"command_line", command_line}};
}

}  // namespace mfg::io
