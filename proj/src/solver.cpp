#include "mfg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfg/kinetics.hpp"
#include "mfg/ode.hpp"
#include "mfg/stationary.hpp"

namespace mfg {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Oscillating: return "oscillating";
  }
  return "unknown";
}

Matrix turnpike_reference(const Matrix& x0) {
  Matrix ref(x0.rows(), x0.cols());
  for (Eigen::Index j = 0; j < x0.cols(); ++j)
    ref.col(j).setConstant(x0.col(j).sum() / static_cast<double>(x0.rows()));
  return ref;
}

double default_horizon(const GameConfig& cfg) {
  const double r = min_positive_rate(cfg);
  if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("default horizon: config has no positive rate");
  return 50.0 / r;
}

namespace {

ControlProvider interval_controls(const std::vector<Control>& path, double t0, double h) {
  return [&path, t0, h](double t) {
    const auto k = static_cast<long>(std::floor((t - t0) / h));
    return path[static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(path.size()) - 1))];
  };
}

OccupationProvider interpolated(const std::vector<Matrix>& path, double t0, double h) {
  return [&path, t0, h](double t) -> Matrix {
    const double s = (t - t0) / h;
    const long last = static_cast<long>(path.size()) - 1;
    const long k = std::clamp<long>(static_cast<long>(std::floor(s)), 0, std::max<long>(last - 1, 0));
    if (last == 0) return path[0];
    const double a = std::clamp(s - static_cast<double>(k), 0.0, 1.0);
    return (1.0 - a) * path[k] + a * path[k + 1];
  };
}

double path_distance(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, (a[k] - b[k]).cwiseAbs().maxCoeff());
  return d;
}

}  // namespace

MfgSolveResult solve_mfg(const Occupation& x0, const Matrix& gT, double T, double dt,
                         const GameConfig& cfg, const SolveOptions& options) {
  require_valid(cfg);
  require_shape(x0.matrix(), cfg.n, cfg.m, "solve_mfg (x0)");
  require_shape(gT, cfg.n, cfg.m, "solve_mfg (gT)");
  if (!(T > 0.0)) throw std::invalid_argument("solve_mfg: T must be positive");
  if (!(options.damping > 0.0 && options.damping <= 1.0))
    throw std::invalid_argument("solve_mfg: damping must lie in (0, 1]");
  if (options.max_iter < 1) throw std::invalid_argument("solve_mfg: max_iter must be at least 1");

  const auto grid = ode::TimeGrid::cover(0.0, T, dt);
  const double h = grid.step();

  std::vector<Control> controls(grid.steps, Control(cfg.n, cfg.m));
  std::vector<Control> previous;
  std::vector<Matrix> x_path = integrate_forward(x0, interval_controls(controls, 0.0, h), 0.0, T, h, cfg).states;

  MfgSolveResult result;
  result.damping = options.damping;
  Trajectory g_traj;
  std::vector<Matrix> x_pure;
  bool done = false;

  for (int iter = 1; iter <= options.max_iter && !done; ++iter) {
    result.iterations = iter;
    g_traj = integrate_backward(gT, interpolated(x_path, 0.0, h), 0.0, T, h, cfg,
                                BackwardControl::optimizing());

    std::vector<Control> next;
    next.reserve(grid.steps);
    for (int k = 0; k < grid.steps; ++k)
      next.push_back(optimal_control(0.5 * (g_traj.states[k] + g_traj.states[k + 1]), cfg));

    x_pure = integrate_forward(x0, interval_controls(next, 0.0, h), 0.0, T, h, cfg).states;
    result.last_change = path_distance(x_pure, x_path);

    if (next == controls && result.last_change < options.tolerance) {
      result.converged = true;
      result.status = SolveStatus::Converged;
      done = true;
      break;
    }

    if (!previous.empty() && next == previous && next != controls) {
      ++result.oscillations;
      result.damping *= 0.5;
      if (result.damping < options.min_damping) {
        result.status = SolveStatus::Oscillating;
        done = true;
      }
    }

    const double theta = result.damping;
    for (std::size_t k = 0; k < x_path.size(); ++k) x_path[k] = theta * x_pure[k] + (1.0 - theta) * x_path[k];
    previous = std::move(controls);
    controls = std::move(next);
  }

  if (!result.converged && result.status != SolveStatus::Oscillating)
    result.status = result.oscillations > 0 ? SolveStatus::Oscillating : SolveStatus::MaxIterations;

  // The stored path is always the pure forward solution of the stored control.
  if (!result.converged)
    x_pure = integrate_forward(x0, interval_controls(controls, 0.0, h), 0.0, T, h, cfg).states;

  result.times.resize(grid.steps + 1);
  for (int k = 0; k <= grid.steps; ++k) result.times[k] = grid.at(k);
  result.x = std::move(x_pure);
  result.g = std::move(g_traj.states);
  result.controls = std::move(controls);
  result.node_controls.reserve(result.g.size());
  for (const auto& g : result.g) result.node_controls.push_back(optimal_control(g, cfg));

  result.x_ref = turnpike_reference(x0.matrix());
  result.turnpike_distance.reserve(result.x.size());
  for (const auto& x : result.x) result.turnpike_distance.push_back((x - result.x_ref).cwiseAbs().maxCoeff());
  for (std::size_t k = 0; k < result.g.size(); ++k) {
    auto v = cone_violations(result.g[k], cfg, result.times[k]);
    result.cone_violations.insert(result.cone_violations.end(), v.begin(), v.end());
  }
  return result;
}

double cone_check(const Matrix& g, const GameConfig& cfg) {
  require_shape(g, cfg.n, cfg.m, "cone_check");
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg.n; ++i)
    for (int a = 0; a < cfg.m; ++a)
      for (int b = 0; b < cfg.m; ++b)
        if (a != b) worst = std::max(worst, g(i, b) - cfg.fee_B(a, b) - g(i, a));
  return worst;
}

std::vector<ConeViolation> cone_violations(const Matrix& g, const GameConfig& cfg, double t) {
  require_shape(g, cfg.n, cfg.m, "cone_violations");
  std::vector<ConeViolation> out;
  for (int i = 0; i < cfg.n; ++i)
    for (int a = 0; a < cfg.m; ++a)
      for (int b = 0; b < cfg.m; ++b) {
        if (a == b) continue;
        const double margin = g(i, b) - cfg.fee_B(a, b) - g(i, a);
        if (margin > 0.0) out.push_back({t, i, a, b, margin});
      }
  return out;
}

TangentCondition boundary_tangent_condition(const Matrix& g, const Matrix& x, const GameConfig& cfg,
                                            int j, int alpha, int beta) {
  require_shape(g, cfg.n, cfg.m, "boundary_tangent_condition (payoff)");
  if (j < 0 || j >= cfg.n || alpha < 0 || alpha >= cfg.m || beta < 0 || beta >= cfg.m || alpha == beta)
    throw std::invalid_argument("boundary_tangent_condition: triple out of range");
  const double gap = g(j, beta) - cfg.fee_B(alpha, beta) - g(j, alpha);
  if (std::abs(gap) > 1e-9)
    throw std::invalid_argument("boundary_tangent_condition: triple is not on the cone boundary (gap " +
                                std::to_string(gap) + ")");

  TangentCondition out;
  const Matrix dg = hjb_rhs(g, x, Control(cfg.n, cfg.m), cfg);
  out.full = dg(j, alpha) - dg(j, beta);

  auto drift = [&](int c) {
    double s = 0.0;
    if (j + 1 < cfg.n) s += cfg.q_up(j, c) * (g(j + 1, c) - g(j, c));
    if (j > 0) s += cfg.q_down(j, c) * (g(j - 1, c) - g(j, c));
    return s;
  };
  out.leading = drift(beta) - drift(alpha);
  return out;
}

RateOrderingReport rate_ordering_check(const GameConfig& cfg) {
  RateOrderingReport report;
  for (int a = 0; a < cfg.m; ++a)
    for (int b = a + 1; b < cfg.m; ++b) {
      bool a_le_b = true;
      bool b_lt_a = true;
      for (int i = 0; i + 1 < cfg.n; ++i) {
        const double qa = cfg.q_up(i, a);
        const double qb = cfg.q_up(i, b);
        a_le_b = a_le_b && qa <= qb;
        b_lt_a = b_lt_a && qb < qa;
      }
      PairOrdering p{a, b, RateOrdering::Mixed};
      if (a_le_b) {
        p.ordering = RateOrdering::AlphaBelowBeta;
      } else if (b_lt_a) {
        p.ordering = RateOrdering::BetaBelowAlpha;
      }
      report.pairs.push_back(p);
    }
  return report;
}

TurnpikeSummary turnpike_metrics(const MfgSolveResult& result, const GameConfig& cfg) {
  TurnpikeSummary s;
  if (result.times.empty()) return s;
  const double t0 = result.times.front();
  const double T = result.times.back();
  s.window_lo = t0 + 0.1 * (T - t0);
  s.window_hi = t0 + 0.9 * (T - t0);
  s.distance = result.turnpike_distance;
  s.plateau = s.distance.back();
  for (std::size_t k = 0; k < s.distance.size(); ++k) {
    const double t = result.times[k];
    if (t >= s.window_lo && t <= s.window_hi) s.middle_sup = std::max(s.middle_sup, s.distance[k]);
    if (k > 0 && s.distance[k - 1] > 2.0 * s.plateau)
      s.max_ripple = std::max(s.max_ripple, s.distance[k] - s.distance[k - 1]);
  }

  std::size_t switching = 0;
  for (const auto& u : result.controls)
    if (!u.is_zero()) ++switching;
  s.switch_fraction = result.controls.empty() ? 0.0 : static_cast<double>(switching) / result.controls.size();

  if (cfg.regime && !result.g.empty()) {
    try {
      const Matrix g_stat = stationary_solution(cfg).g;
      std::vector<double> gd;
      gd.reserve(result.g.size());
      double sup = 0.0;
      for (std::size_t k = 0; k < result.g.size(); ++k) {
        gd.push_back((result.g[k] - g_stat).cwiseAbs().maxCoeff());
        const double t = result.times[k];
        if (t >= s.window_lo && t <= s.window_hi) sup = std::max(sup, gd.back());
      }
      s.g_distance = std::move(gd);
      s.g_middle_sup = sup;
    } catch (const AssumptionError&) {
      // no stationary expansion for this config
    }
  }
  return s;
}

}  // namespace mfg
