#include "mfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mfg {

namespace {

constexpr double kRegimeTolerance = 1e-12;
constexpr double kTieTolerance = 1e-12;

std::string at(const char* field, int i, int j) {
  std::ostringstream os;
  os << field << "[" << i + 1 << "," << j + 1 << "]";
  return os.str();
}

std::string at(const char* field, int i, int j, int k) {
  std::ostringstream os;
  os << field << "[" << i + 1 << "," << j + 1 << "," << k + 1 << "]";
  return os.str();
}

bool close(double a, double b) {
  return std::abs(a - b) <= kRegimeTolerance * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

void check_matrix(std::vector<Violation>& out, const Matrix& a, int rows, int cols,
                  const char* field, bool nonnegative) {
  if (a.rows() != rows || a.cols() != cols) {
    std::ostringstream os;
    os << field << " has shape " << a.rows() << "x" << a.cols() << ", expected " << rows << "x"
       << cols;
    out.push_back({field, os.str()});
    return;
  }
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (!std::isfinite(a(i, j))) {
        out.push_back({at(field, i, j), std::string(field) + " entry not finite"});
      } else if (nonnegative && a(i, j) < 0.0) {
        out.push_back({at(field, i, j), std::string(field) + " entry negative"});
      }
    }
  }
}

void check_tensor(std::vector<Violation>& out, const RateTensor& t, int n, int m,
                  const char* field) {
  if (t.levels() != n || t.behaviours() != m) {
    out.push_back({field, std::string(field) + " has wrong shape"});
    return;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        if (!std::isfinite(t(i, j, k)) || t(i, j, k) < 0.0)
          out.push_back({at(field, i, j, k), std::string(field) + " entry negative or not finite"});
}

void check_row_zero(std::vector<Violation>& out, const Matrix& a, int row, const char* field,
                    const char* label) {
  for (int j = 0; j < a.cols(); ++j)
    if (a(row, j) != 0.0)
      out.push_back({at(field, row, j), std::string(field) + " " + label + " nonzero"});
}

void check_slice_zero(std::vector<Violation>& out, const RateTensor& t, int row,
                      const char* field, const char* label) {
  for (int j = 0; j < t.behaviours(); ++j)
    for (int k = 0; k < t.behaviours(); ++k)
      if (t(row, j, k) != 0.0)
        out.push_back({at(field, row, j, k), std::string(field) + " " + label + " nonzero"});
}

bool tensor_nonzero(const RateTensor& t) {
  return std::any_of(t.data().begin(), t.data().end(), [](double v) { return v != 0.0; });
}

}  // namespace

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::ID1: return "id1";
    case Regime::ID2: return "id2";
    case Regime::ID3: return "id3";
  }
  return "id1";
}

std::optional<Regime> parse_regime(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "id1") return Regime::ID1;
  if (s == "id2") return Regime::ID2;
  if (s == "id3") return Regime::ID3;
  return std::nullopt;
}

GameConfig GameConfig::zeros(int n, int m) {
  GameConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.q_up = Matrix::Zero(n, m);
  cfg.q_down = Matrix::Zero(n, m);
  cfg.q_up_evo = RateTensor(n, m);
  cfg.q_down_evo = RateTensor(n, m);
  cfg.w = Matrix::Zero(n, m);
  cfg.fee_B = Matrix::Zero(m, m);
  cfg.fee_H = Vector::Zero(n);
  return cfg;
}

void apply_regime(GameConfig& cfg, Regime regime, double delta) {
  cfg.regime = RegimeSpec{regime, delta};
  switch (regime) {
    case Regime::ID1:
      cfg.delta_dis = delta;
      cfg.delta_int = delta * delta;
      break;
    case Regime::ID2:
      cfg.delta_dis = delta;
      cfg.delta_int = delta;
      break;
    case Regime::ID3:
      cfg.delta_int = delta;
      cfg.delta_dis = delta * delta;
      break;
  }
}

void Control::set_target(int i, int j, int k) {
  if (k == j) throw std::invalid_argument("control: a switch to the current behaviour is not a move");
  if (k < 0 || k >= m_) throw std::out_of_range("control: behaviour index out of range");
  target_[static_cast<std::size_t>(i) * m_ + j] = k;
}

bool Control::is_zero() const {
  return std::all_of(target_.begin(), target_.end(), [](int t) { return t == kStay; });
}

std::size_t Control::switch_count() const {
  return static_cast<std::size_t>(
      std::count_if(target_.begin(), target_.end(), [](int t) { return t != kStay; }));
}

Occupation::Occupation(Matrix x) : x_(std::move(x)) {
  if (x_.size() == 0) throw ConfigError("occupation is empty");
  for (Eigen::Index i = 0; i < x_.rows(); ++i)
    for (Eigen::Index j = 0; j < x_.cols(); ++j)
      if (!std::isfinite(x_(i, j)) || x_(i, j) < 0.0)
        throw ConfigError("occupation entry " + at("x", static_cast<int>(i), static_cast<int>(j)) +
                          " is negative or not finite");
  if (std::abs(x_.sum() - 1.0) > kMassTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "occupation mass is " << x_.sum() << ", expected 1";
    throw ConfigError(os.str());
  }
}

Occupation Occupation::uniform(int n, int m) {
  return Occupation(Matrix::Constant(n, m, 1.0 / (static_cast<double>(n) * m)));
}

std::vector<Violation> validate(const GameConfig& cfg) {
  std::vector<Violation> out;
  if (cfg.n <= 0) out.push_back({"dimensions.n", "n must be positive"});
  if (cfg.m <= 0) out.push_back({"dimensions.m", "m must be positive"});
  if (!out.empty()) return out;

  const int n = cfg.n;
  const int m = cfg.m;
  const std::size_t before = out.size();
  check_matrix(out, cfg.q_up, n, m, "q_up", true);
  check_matrix(out, cfg.q_down, n, m, "q_down", true);
  check_tensor(out, cfg.q_up_evo, n, m, "q_up_evo");
  check_tensor(out, cfg.q_down_evo, n, m, "q_down_evo");
  check_matrix(out, cfg.w, n, m, "w", false);
  check_matrix(out, cfg.fee_B, m, m, "fee_B", true);
  if (cfg.fee_H.size() != n) {
    out.push_back({"fee_H", "fee_H must have n entries"});
  } else {
    for (int i = 0; i < n; ++i)
      if (!std::isfinite(cfg.fee_H(i)) || cfg.fee_H(i) < 0.0)
        out.push_back({"fee_H[" + std::to_string(i + 1) + "]", "fee_H entry negative or not finite"});
  }
  if (cfg.q_sink) {
    check_matrix(out, cfg.q_sink->rates, n, m, "q_sink", true);
    check_tensor(out, cfg.q_sink->evo, n, m, "q_sink_evo");
  }
  // Shape problems make the remaining index checks meaningless.
  for (std::size_t v = before; v < out.size(); ++v)
    if (out[v].message.find("shape") != std::string::npos) return out;

  check_row_zero(out, cfg.q_up, n - 1, "q_up", "row n");
  check_row_zero(out, cfg.q_down, 0, "q_down", "row 1");
  check_slice_zero(out, cfg.q_up_evo, n - 1, "q_up_evo", "slice n");
  check_slice_zero(out, cfg.q_down_evo, 0, "q_down_evo", "slice 1");
  for (int j = 0; j < m; ++j)
    if (cfg.fee_B(j, j) != 0.0) out.push_back({at("fee_B", j, j), "fee_B diagonal nonzero"});

  if (cfg.detailed_balance) {
    for (int i = 0; i + 1 < n; ++i)
      for (int j = 0; j < m; ++j)
        if (cfg.q_up(i, j) != cfg.q_down(i + 1, j))
          out.push_back({at("q_up", i, j), "detailed balance: q_up[i,j] != q_down[i+1,j]"});
  }

  if (cfg.q_sink) {
    check_row_zero(out, cfg.q_sink->rates, 0, "q_sink", "row 1");
    check_slice_zero(out, cfg.q_sink->evo, 0, "q_sink_evo", "slice 1");
    if (!cfg.q_down.isZero(0.0) || tensor_nonzero(cfg.q_down_evo))
      out.push_back({"rates.q_sink",
                     "sink variant mixes neighbour downgrades with sink downgrades"});
    if (cfg.detailed_balance)
      out.push_back({"flags.detailed_balance", "detailed balance is undefined for the sink variant"});
  }

  if (!(std::isfinite(cfg.lambda) && cfg.lambda > 0.0))
    out.push_back({"scales.lambda", "lambda must be positive"});
  if (!(std::isfinite(cfg.delta_int) && cfg.delta_int >= 0.0))
    out.push_back({"scales.delta_int", "delta_int must be nonnegative"});
  if (!(std::isfinite(cfg.delta_dis) && cfg.delta_dis > 0.0))
    out.push_back({"scales.delta_dis", "delta_dis must be positive"});

  if (cfg.regime) {
    const double d = cfg.regime->delta;
    if (!(std::isfinite(d) && d > 0.0)) {
      out.push_back({"scales.delta", "delta must be positive"});
    } else {
      double want_int = 0.0;
      double want_dis = 0.0;
      switch (cfg.regime->regime) {
        case Regime::ID1: want_dis = d; want_int = d * d; break;
        case Regime::ID2: want_dis = d; want_int = d; break;
        case Regime::ID3: want_dis = d * d; want_int = d; break;
      }
      if (!close(cfg.delta_int, want_int) || !close(cfg.delta_dis, want_dis))
        out.push_back({"scales.regime", "regime coupling: " + to_string(cfg.regime->regime) +
                                            " requires different delta_int/delta_dis"});
    }
  }
  return out;
}

void require_valid(const GameConfig& cfg) {
  const auto violations = validate(cfg);
  if (violations.empty()) return;
  std::ostringstream os;
  os << "invalid config:";
  for (const auto& v : violations) os << " [" << v.field << "] " << v.message << ";";
  throw ConfigError(os.str());
}

void require_shape(const Matrix& a, int rows, int cols, const char* what) {
  if (a.rows() != rows || a.cols() != cols) {
    std::ostringstream os;
    os << what << ": dimension mismatch, got " << a.rows() << "x" << a.cols() << ", expected "
       << rows << "x" << cols;
    throw std::invalid_argument(os.str());
  }
}

Matrix effective_rewards(const GameConfig& cfg) {
  Matrix out = cfg.w;
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.m; ++j) out(i, j) -= cfg.q_down(i, j) * cfg.fee_H(i);
  return out;
}

DominantLevel dominant_level(const GameConfig& cfg) {
  DominantLevel out;
  out.column_sums = effective_rewards(cfg).colwise().sum().transpose();
  const double scale = out.column_sums.cwiseAbs().maxCoeff();
  const double tol = kTieTolerance * scale;

  Eigen::Index best = 0;
  out.column_sums.maxCoeff(&best);
  out.b = static_cast<int>(best);
  out.unique = true;
  for (int j = 0; j < cfg.m; ++j) {
    if (j != out.b && out.column_sums(out.b) - out.column_sums(j) <= tol) out.unique = false;
    if (std::abs(out.column_sums(j)) <= tol) out.zero_sum_levels.push_back(j);
  }
  return out;
}

double min_positive_rate(const GameConfig& cfg) {
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&best](double v) {
    if (v > 0.0) best = std::min(best, v);
  };
  for (Eigen::Index i = 0; i < cfg.q_up.size(); ++i) consider(cfg.q_up.data()[i]);
  for (Eigen::Index i = 0; i < cfg.q_down.size(); ++i) consider(cfg.q_down.data()[i]);
  for (double v : cfg.q_up_evo.data()) consider(v);
  for (double v : cfg.q_down_evo.data()) consider(v);
  if (cfg.q_sink) {
    for (Eigen::Index i = 0; i < cfg.q_sink->rates.size(); ++i) consider(cfg.q_sink->rates.data()[i]);
    for (double v : cfg.q_sink->evo.data()) consider(v);
  }
  return best;
}

}  // namespace mfg
