#include "mfg/stationary.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mfg/hjb.hpp"
#include "mfg/kinetics.hpp"

namespace mfg {

namespace {

constexpr double kMeanZeroTolerance = 1e-12;
constexpr double kResidualTolerance = 1e-10;
constexpr double kSolvabilityTolerance = 1e-9;

// Generator with the given upward / downward rate per level, boundaries omitted.
Matrix tridiagonal_generator(const Vector& up_at, const Vector& down_at) {
  const int n = static_cast<int>(up_at.size());
  Matrix A = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (i + 1 < n) {
      A(i, i) -= up_at(i);
      A(i + 1, i) += up_at(i);
    }
    if (i > 0) {
      A(i, i) -= down_at(i);
      A(i - 1, i) += down_at(i);
    }
  }
  return A;
}

void require_detailed_balance(const LevelChain& chain, const char* what) {
  if (!chain.detailed_balance)
    throw AssumptionError("assumption 1", std::string(what) + " requires detailed balance");
  for (int i = 0; i < chain.up.size(); ++i)
    if (!(chain.up(i) > 0.0))
      throw AssumptionError("assumption 1", std::string(what) + ": rate q_" +
                                                std::to_string(i + 1) + " is not positive");
}

Vector column_mean_fill(const Matrix& a, int j) {
  return Vector::Constant(a.rows(), a.col(j).mean());
}

}  // namespace

LevelChain build_level_chain(int j, const GameConfig& cfg) {
  if (j < 0 || j >= cfg.m) throw std::out_of_range("build_level_chain: behaviour index out of range");
  const int n = cfg.n;
  LevelChain chain;
  chain.j = j;
  chain.A = tridiagonal_generator(cfg.q_up.col(j), cfg.q_down.col(j));
  chain.up = Vector::Zero(std::max(n - 1, 0));
  chain.down = Vector::Zero(std::max(n - 1, 0));
  chain.detailed_balance = true;
  for (int i = 0; i + 1 < n; ++i) {
    chain.up(i) = cfg.q_up(i, j);
    chain.down(i) = cfg.q_down(i + 1, j);
    if (chain.up(i) != chain.down(i)) chain.detailed_balance = false;
  }
  return chain;
}

Matrix interaction_matrix(int j, const Matrix& x, const GameConfig& cfg) {
  require_shape(x, cfg.n, cfg.m, "interaction_matrix");
  Vector up_at = Vector::Zero(cfg.n);
  Vector down_at = Vector::Zero(cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    for (int k = 0; k < cfg.m; ++k) {
      up_at(i) += cfg.q_up_evo(i, j, k) * x(i, k);
      down_at(i) += cfg.q_down_evo(i, j, k) * x(i, k);
    }
  return tridiagonal_generator(up_at, down_at);
}

Vector kernel(const LevelChain& chain, double mass) {
  const int n = chain.size();
  Vector p(n);
  p(0) = 1.0;
  for (int i = 1; i < n; ++i) {
    if (!(chain.up(i - 1) > 0.0) || !(chain.down(i - 1) > 0.0))
      throw AssumptionError("assumption 1", "degenerate chain: zero rate between levels " +
                                                std::to_string(i) + " and " + std::to_string(i + 1));
    p(i) = p(i - 1) * (chain.up(i - 1) / chain.down(i - 1));
  }
  return (mass / p.sum()) * p;
}

Vector kernel_descending(const LevelChain& chain, double mass) {
  const int n = chain.size();
  Vector p(n);
  p(n - 1) = 1.0;
  for (int i = n - 2; i >= 0; --i) {
    if (!(chain.up(i) > 0.0) || !(chain.down(i) > 0.0))
      throw AssumptionError("assumption 1", "degenerate chain: zero rate between levels " +
                                                std::to_string(i + 1) + " and " + std::to_string(i + 2));
    p(i) = p(i + 1) * (chain.down(i) / chain.up(i));
  }
  return (mass / p.sum()) * p;
}

Vector complement_closed_form(const LevelChain& chain, const Vector& y) {
  const int n = chain.size();
  if (y.size() != n) throw std::invalid_argument("complement_closed_form: size mismatch");
  const Vector& q = chain.q();

  // ratio(a) = (y_1 + ... + y_{a+1}) / q_{a+1}, 0-based a < n-1
  Vector ratio(std::max(n - 1, 0));
  double partial = 0.0;
  for (int a = 0; a + 1 < n; ++a) {
    partial += y(a);
    ratio(a) = partial / q(a);
  }

  Vector z(n);
  double first = 0.0;
  for (int a = 0; a + 1 < n; ++a) first += (static_cast<double>(n - a - 1) / n) * ratio(a);
  z(0) = first;
  double running = 0.0;
  for (int i = 1; i < n; ++i) {
    running += ratio(i - 1);
    z(i) = first - running;
  }
  return z;
}

int complement_sign() {
  static const int sign = [] {
    LevelChain probe;
    probe.A = Matrix{{-1.0, 1.0}, {1.0, -1.0}};
    probe.up = Vector::Ones(1);
    probe.down = Vector::Ones(1);
    probe.detailed_balance = true;
    const Vector y{{1.0, -1.0}};
    const Vector Az = probe.A * complement_closed_form(probe, y);
    if ((Az - y).cwiseAbs().maxCoeff() < kResidualTolerance) return 1;
    if ((Az + y).cwiseAbs().maxCoeff() < kResidualTolerance) return -1;
    throw NumericalError("complement sign probe: closed form solves neither A z = y nor A z = -y");
  }();
  return sign;
}

Vector solve_on_complement(const LevelChain& chain, const Vector& rhs) {
  require_detailed_balance(chain, "solve_on_complement");
  if (rhs.size() != chain.size()) throw std::invalid_argument("solve_on_complement: size mismatch");
  const double scale = std::max(1.0, rhs.cwiseAbs().sum());
  if (std::abs(rhs.sum()) > kMeanZeroTolerance * scale) {
    std::ostringstream os;
    os.precision(17);
    os << "right side is not in the complement of the kernel (sum = " << rhs.sum() << ")";
    throw AssumptionError("complement", os.str());
  }
  const Vector z = complement_closed_form(chain, complement_sign() * rhs);
  const double residual = (chain.A * z - rhs).cwiseAbs().maxCoeff();
  if (!(residual < kResidualTolerance * std::max(1.0, rhs.cwiseAbs().maxCoeff()))) {
    std::ostringstream os;
    os << "solve_on_complement: residual " << residual << " exceeds tolerance";
    throw NumericalError(os.str());
  }
  return z;
}

void certify_assumptions(const GameConfig& cfg) {
  require_valid(cfg);
  if (cfg.is_sink_variant())
    throw AssumptionError("assumption 1", "stationary expansion needs the neighbour-transition model");
  if (!cfg.detailed_balance)
    throw AssumptionError("assumption 1", "detailed balance flag is not set");
  for (int j = 0; j < cfg.m; ++j)
    for (int i = 0; i + 1 < cfg.n; ++i)
      if (!(cfg.q_up(i, j) > 0.0))
        throw AssumptionError("assumption 1", "q_up[" + std::to_string(i + 1) + "," +
                                                  std::to_string(j + 1) + "] is not positive");
  const auto dom = dominant_level(cfg);
  if (!dom.nondegenerate())
    throw AssumptionError("assumption 3", "sum_i w~_ij vanishes for behaviour level " +
                                              std::to_string(dom.zero_sum_levels.front() + 1));
  if (!dom.unique) throw AssumptionError("assumption 4", "dominant behaviour level is not unique");
}

Matrix g0_term(const GameConfig& cfg) {
  const auto dom = dominant_level(cfg);
  if (!dom.nondegenerate())
    throw AssumptionError("assumption 3", "sum_i w~_ij vanishes for behaviour level " +
                                              std::to_string(dom.zero_sum_levels.front() + 1));
  const Matrix wt = effective_rewards(cfg);
  Matrix g0(cfg.n, cfg.m);
  for (int j = 0; j < cfg.m; ++j) g0.col(j) = column_mean_fill(wt, j);
  return g0;
}

Matrix g1_term(const GameConfig& cfg) {
  const Matrix wt = effective_rewards(cfg);
  const Matrix g0 = g0_term(cfg);
  Matrix g1(cfg.n, cfg.m);
  // -A^T g1 + g0 = w~ with A symmetric, i.e. A g1 = g0 - w~.
  for (int j = 0; j < cfg.m; ++j) {
    const auto chain = build_level_chain(j, cfg);
    const Vector rhs = g0.col(j) - wt.col(j);
    g1.col(j) = solve_on_complement(chain, rhs);
  }
  return g1;
}

Matrix g1_indicator_form(const GameConfig& cfg) {
  const Matrix wt = effective_rewards(cfg);
  const int n = cfg.n;
  Matrix out = Matrix::Zero(n, cfg.m);
  for (int j = 0; j < cfg.m; ++j) {
    const double mean = wt.col(j).sum() / n;
    for (int i = 1; i <= n; ++i) {        // 1-based as the formula is written
      double value = 0.0;
      double partial = 0.0;
      for (int a = 1; a <= n - 1; ++a) {
        partial += wt(a - 1, j);
        const double q = cfg.q_up(a - 1, j);
        const double weight = i > a ? static_cast<double>(n - a - 1) / n : static_cast<double>(n - a) / n;
        value += weight * (a / q * mean - partial / q);
      }
      out(i - 1, j) = value;
    }
  }
  return out;
}

Matrix leading_density(const GameConfig& cfg, int b) {
  Matrix x0 = Matrix::Zero(cfg.n, cfg.m);
  x0.col(b).setConstant(1.0 / cfg.n);
  return x0;
}

Matrix x1_correction(const GameConfig& cfg) {
  const auto dom = dominant_level(cfg);
  if (!dom.unique) throw AssumptionError("assumption 4", "dominant behaviour level is not unique");
  const int b = dom.b;
  const Matrix x0 = leading_density(cfg, b);
  const auto chain = build_level_chain(b, cfg);
  // A_b x1 + E_b(x0) x0_b = 0; the right side telescopes to a zero sum.
  const Vector rhs = -(interaction_matrix(b, x0, cfg) * x0.col(b));
  Matrix x1 = Matrix::Zero(cfg.n, cfg.m);
  x1.col(b) = solve_on_complement(chain, rhs);
  return x1;
}

Vector id2_solvability(const GameConfig& cfg) {
  const auto dom = dominant_level(cfg);
  const Matrix x0 = leading_density(cfg, dom.b);
  const Matrix g1 = g1_term(cfg);
  Vector sums(cfg.m);
  for (int j = 0; j < cfg.m; ++j) {
    const Matrix E0 = interaction_matrix(j, x0, cfg);
    Vector r = g1.col(j) - E0.transpose() * g1.col(j);
    for (int i = 0; i < cfg.n; ++i) {
      double s = 0.0;
      for (int k = 0; k < cfg.m; ++k) s += cfg.q_down_evo(i, j, k) * x0(i, k);
      r(i) += cfg.fee_H(i) * s;
    }
    sums(j) = r.sum();
  }
  return sums;
}

Matrix g2_term(const GameConfig& cfg, Regime regime) {
  if (regime == Regime::ID3)
    throw std::invalid_argument("g2_term: the ID3 expansion stops at g1");
  const auto dom = dominant_level(cfg);
  const Matrix x0 = leading_density(cfg, dom.b);
  const Matrix g0 = g0_term(cfg);
  const Matrix g1 = g1_term(cfg);
  const Matrix x1 = regime == Regime::ID2 ? x1_correction(cfg) : Matrix::Zero(cfg.n, cfg.m);

  Matrix g2(cfg.n, cfg.m);
  for (int j = 0; j < cfg.m; ++j) {
    const auto chain = build_level_chain(j, cfg);
    const Matrix E0 = interaction_matrix(j, x0, cfg);
    Vector rhs;
    if (regime == Regime::ID1) {
      rhs = g1.col(j) - E0.transpose() * g0.col(j);
    } else {
      const Matrix E1 = interaction_matrix(j, x1, cfg);
      rhs = g1.col(j) - E0.transpose() * g1.col(j) - E1.transpose() * g0.col(j);
      for (int i = 0; i < cfg.n; ++i) {
        double s = 0.0;
        for (int k = 0; k < cfg.m; ++k) s += cfg.q_down_evo(i, j, k) * x0(i, k);
        rhs(i) += cfg.fee_H(i) * s;
      }
      if (std::abs(rhs.sum()) > kSolvabilityTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "ID2 solvability sum for behaviour level " << j + 1 << " is " << rhs.sum();
        throw AssumptionError("ID2 solvability", os.str());
      }
      // Remove rounding-level mass so the complement solve accepts it.
      rhs.array() -= rhs.mean();
    }
    g2.col(j) = solve_on_complement(chain, rhs);
  }
  return g2;
}

double stationary_hjb_residual(const Matrix& g, const Matrix& x, const GameConfig& cfg) {
  return hjb_rhs(g, x, Control(cfg.n, cfg.m), cfg).cwiseAbs().maxCoeff();
}

StationarySolution stationary_solution(const GameConfig& cfg) {
  certify_assumptions(cfg);
  if (!cfg.regime) throw ConfigError("stationary_solution: no regime configured (scales.regime)");

  StationarySolution s;
  const auto dom = dominant_level(cfg);
  s.b = dom.b;
  s.regime = cfg.regime->regime;
  s.delta = cfg.regime->delta;
  s.delta_int = cfg.delta_int;
  s.delta_dis = cfg.delta_dis;
  s.complement_sign = complement_sign();

  s.x0 = leading_density(cfg, s.b);
  s.x1 = x1_correction(cfg);
  s.g0 = g0_term(cfg);
  s.g1 = g1_term(cfg);
  s.g1_indicator_discrepancy = (g1_indicator_form(cfg) - s.g1).cwiseAbs().maxCoeff();
  if (s.regime != Regime::ID3) s.g2 = g2_term(cfg, s.regime);

  s.g = s.g0 / s.delta_dis + s.g1;
  if (s.g2) s.g += s.delta_dis * *s.g2;

  s.strategic_margin = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.m; ++k)
    if (k != s.b)
      s.strategic_margin = std::max(s.strategic_margin, dom.column_sums(k) - dom.column_sums(s.b));

  const Matrix x = s.density();
  s.consistency_margin = consistency_margin(s.g, x, cfg);
  s.hjb_residual = stationary_hjb_residual(s.g, x, cfg);
  s.kinetic_residual = stationary_residual(x, cfg);
  return s;
}

}  // namespace mfg
