#include "mfg/config_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mfg {

using nlohmann::json;

namespace {

std::string index_path(const std::string& base, std::initializer_list<int> idx) {
  std::string out = base;
  for (int i : idx) out += "[" + std::to_string(i + 1) + "]";
  return out;
}

const json& child(const json& parent, const std::string& key, const std::string& path) {
  if (!parent.is_object()) throw ConfigError("config field " + path + ": expected an object");
  auto it = parent.find(key);
  if (it == parent.end()) throw ConfigError("config field " + path + "." + key + ": missing");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError("config field " + path + ": expected a number, got " + v.dump());
  return v.get<double>();
}

int integer(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 1)
    throw ConfigError("config field " + path + ": expected a positive integer, got " + v.dump());
  return v.get<int>();
}

void require_array(const json& v, std::size_t size, const std::string& path) {
  if (!v.is_array()) throw ConfigError("config field " + path + ": expected an array");
  if (v.size() != size)
    throw ConfigError("config field " + path + ": expected " + std::to_string(size) + " entries, got " +
                      std::to_string(v.size()));
}

Matrix read_matrix(const json& v, int rows, int cols, const std::string& path) {
  require_array(v, rows, path);
  Matrix a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const std::string row_path = index_path(path, {i});
    require_array(v[i], cols, row_path);
    for (int j = 0; j < cols; ++j) a(i, j) = number(v[i][j], index_path(path, {i, j}));
  }
  return a;
}

Vector read_vector(const json& v, int size, const std::string& path) {
  require_array(v, size, path);
  Vector a(size);
  for (int i = 0; i < size; ++i) a(i) = number(v[i], index_path(path, {i}));
  return a;
}

RateTensor read_tensor(const json& v, int n, int m, const std::string& path) {
  require_array(v, n, path);
  RateTensor t(n, m);
  for (int i = 0; i < n; ++i) {
    require_array(v[i], m, index_path(path, {i}));
    for (int j = 0; j < m; ++j) {
      require_array(v[i][j], m, index_path(path, {i, j}));
      for (int k = 0; k < m; ++k) t(i, j, k) = number(v[i][j][k], index_path(path, {i, j, k}));
    }
  }
  return t;
}

json tensor_to_json(const RateTensor& t) {
  json out = json::array();
  for (int i = 0; i < t.levels(); ++i) {
    json slice = json::array();
    for (int j = 0; j < t.behaviours(); ++j) {
      json row = json::array();
      for (int k = 0; k < t.behaviours(); ++k) row.push_back(t(i, j, k));
      slice.push_back(std::move(row));
    }
    out.push_back(std::move(slice));
  }
  return out;
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

GameConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": malformed JSON (" + e.what() + ")");
  }
  try {
    return parse_config(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

GameConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  const json& dims = child(doc, "dimensions", "");
  const int n = integer(child(dims, "n", "dimensions"), "dimensions.n");
  const int m = integer(child(dims, "m", "dimensions"), "dimensions.m");

  GameConfig cfg = GameConfig::zeros(n, m);
  const json& rates = child(doc, "rates", "");
  cfg.q_up = read_matrix(child(rates, "q_up", "rates"), n, m, "rates.q_up");
  cfg.q_down = read_matrix(child(rates, "q_down", "rates"), n, m, "rates.q_down");
  if (rates.contains("q_up_evo")) cfg.q_up_evo = read_tensor(rates["q_up_evo"], n, m, "rates.q_up_evo");
  if (rates.contains("q_down_evo"))
    cfg.q_down_evo = read_tensor(rates["q_down_evo"], n, m, "rates.q_down_evo");
  if (rates.contains("q_sink") && !rates["q_sink"].is_null()) {
    SinkRates sink{read_matrix(rates["q_sink"], n, m, "rates.q_sink"), RateTensor(n, m)};
    if (rates.contains("q_sink_evo")) sink.evo = read_tensor(rates["q_sink_evo"], n, m, "rates.q_sink_evo");
    cfg.q_sink = std::move(sink);
  }

  const json& econ = child(doc, "economics", "");
  cfg.w = read_matrix(child(econ, "w", "economics"), n, m, "economics.w");
  cfg.fee_B = read_matrix(child(econ, "fee_B", "economics"), m, m, "economics.fee_B");
  cfg.fee_H = read_vector(child(econ, "fee_H", "economics"), n, "economics.fee_H");

  const json& scales = child(doc, "scales", "");
  cfg.lambda = number(child(scales, "lambda", "scales"), "scales.lambda");
  const bool has_regime = scales.contains("regime") && !scales["regime"].is_null();
  if (has_regime) {
    const json& r = scales["regime"];
    if (!r.is_string()) throw ConfigError("config field scales.regime: expected a string");
    const auto regime = parse_regime(r.get<std::string>());
    if (!regime)
      throw ConfigError("config field scales.regime: unknown regime '" + r.get<std::string>() +
                        "' (expected id1, id2 or id3)");
    apply_regime(cfg, *regime, number(child(scales, "delta", "scales"), "scales.delta"));
  }
  // Explicit couplings override the regime defaults; validate() then checks them.
  if (scales.contains("delta_int")) cfg.delta_int = number(scales["delta_int"], "scales.delta_int");
  if (scales.contains("delta_dis")) {
    cfg.delta_dis = number(scales["delta_dis"], "scales.delta_dis");
  } else if (!has_regime) {
    throw ConfigError("config field scales: give either regime and delta or delta_dis");
  }

  if (doc.contains("flags")) {
    const json& flags = doc["flags"];
    if (flags.contains("detailed_balance")) {
      if (!flags["detailed_balance"].is_boolean())
        throw ConfigError("config field flags.detailed_balance: expected true or false");
      cfg.detailed_balance = flags["detailed_balance"].get<bool>();
    }
  }
  return cfg;
}

GameConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

json matrix_to_json(const Matrix& a) {
  json out = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

json config_to_json(const GameConfig& cfg) {
  json doc;
  doc["dimensions"] = {{"n", cfg.n}, {"m", cfg.m}};
  json rates;
  rates["q_up"] = matrix_to_json(cfg.q_up);
  rates["q_down"] = matrix_to_json(cfg.q_down);
  rates["q_up_evo"] = tensor_to_json(cfg.q_up_evo);
  rates["q_down_evo"] = tensor_to_json(cfg.q_down_evo);
  if (cfg.q_sink) {
    rates["q_sink"] = matrix_to_json(cfg.q_sink->rates);
    rates["q_sink_evo"] = tensor_to_json(cfg.q_sink->evo);
  }
  doc["rates"] = std::move(rates);
  json fee_H = json::array();
  for (Eigen::Index i = 0; i < cfg.fee_H.size(); ++i) fee_H.push_back(cfg.fee_H(i));
  doc["economics"] = {{"w", matrix_to_json(cfg.w)}, {"fee_B", matrix_to_json(cfg.fee_B)}, {"fee_H", fee_H}};
  json scales = {{"lambda", cfg.lambda}, {"delta_int", cfg.delta_int}, {"delta_dis", cfg.delta_dis}};
  if (cfg.regime) {
    scales["regime"] = to_string(cfg.regime->regime);
    scales["delta"] = cfg.regime->delta;
  }
  doc["scales"] = std::move(scales);
  doc["flags"] = {{"detailed_balance", cfg.detailed_balance}};
  return doc;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const GameConfig& cfg) { return fnv1a_hex(config_to_json(cfg).dump()); }

}  // namespace mfg
