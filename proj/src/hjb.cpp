#include "mfg/hjb.hpp"

#include <algorithm>
#include <sstream>

#include "mfg/ode.hpp"

namespace mfg {

OccupationProvider constant_occupation(Matrix x) {
  return [x = std::move(x)](double) { return x; };
}

Matrix hjb_rhs(const Matrix& g, const Matrix& x, const Control& u, const GameConfig& cfg) {
  require_shape(g, cfg.n, cfg.m, "hjb_rhs (payoff)");
  require_shape(x, cfg.n, cfg.m, "hjb_rhs (occupation)");
  if (u.levels() != cfg.n || u.behaviours() != cfg.m)
    throw std::invalid_argument("hjb_rhs: control dimension mismatch");
  if (cfg.is_sink_variant())
    throw std::invalid_argument("hjb_rhs: payoff dynamics are defined for neighbour transitions only");

  const int n = cfg.n;
  const int m = cfg.m;
  Matrix dg(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double gij = g(i, j);
      double gain = cfg.w(i, j);

      const int k = u.target(i, j);
      if (k != Control::kStay) gain += cfg.lambda * (g(i, k) - gij - cfg.fee_B(j, k));

      if (i + 1 < n) {
        double up = cfg.q_up(i, j);
        for (int s = 0; s < m; ++s) up += cfg.delta_int * x(i, s) * cfg.q_up_evo(i, j, s);
        gain += up * (g(i + 1, j) - gij);
      }
      if (i > 0) {
        double down = cfg.q_down(i, j);
        for (int s = 0; s < m; ++s) down += cfg.delta_int * x(i, s) * cfg.q_down_evo(i, j, s);
        gain += down * (g(i - 1, j) - gij - cfg.fee_H(i));
      }
      dg(i, j) = cfg.delta_dis * gij - gain;
    }
  }
  return dg;
}

Control optimal_control(const Matrix& g, const GameConfig& cfg) {
  require_shape(g, cfg.n, cfg.m, "optimal_control");
  Control u(cfg.n, cfg.m);
  for (int i = 0; i < cfg.n; ++i) {
    for (int j = 0; j < cfg.m; ++j) {
      int best = Control::kStay;
      double best_gain = kSwitchThreshold;
      for (int k = 0; k < cfg.m; ++k) {
        if (k == j) continue;
        const double gain = g(i, k) - g(i, j) - cfg.fee_B(j, k);
        if (gain > best_gain) {
          best_gain = gain;
          best = k;
        }
      }
      if (best != Control::kStay) u.set_target(i, j, best);
    }
  }
  return u;
}

double consistency_margin(const Matrix& g, const Matrix& x, const GameConfig& cfg) {
  require_shape(g, cfg.n, cfg.m, "consistency_margin (payoff)");
  require_shape(x, cfg.n, cfg.m, "consistency_margin (occupation)");
  double margin = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.m; ++j) {
      if (!(x(i, j) > 1e-9)) continue;
      for (int k = 0; k < cfg.m; ++k)
        if (k != j) margin = std::max(margin, g(i, k) - g(i, j) - cfg.fee_B(j, k));
    }
  return margin;
}

Trajectory integrate_backward(const Matrix& gT, const OccupationProvider& occupation, double t0,
                              double t1, double dt, const GameConfig& cfg,
                              const BackwardControl& mode) {
  require_shape(gT, cfg.n, cfg.m, "integrate_backward");
  const auto grid = ode::TimeGrid::cover(t0, t1, dt);
  const double h = grid.step();

  // Reversed time s = t1 - t turns the terminal-value problem into an initial-value one:
  // dG/ds = -g'(t1 - s).
  auto reversed = [&](const Control* fixed) {
    return [&, fixed](double s, const Matrix& G) -> Matrix {
      const double t = t1 - s;
      const Matrix x = occupation(t);
      if (fixed) return -hjb_rhs(G, x, *fixed, cfg);
      return -hjb_rhs(G, x, optimal_control(G, cfg), cfg);
    };
  };

  std::vector<Matrix> states;
  states.reserve(grid.steps + 1);
  states.push_back(gT);
  Matrix G = gT;
  for (int k = 0; k < grid.steps; ++k) {
    const double s = k * h;
    if (mode.is_optimizing()) {
      G = ode::rk4_step(G, s, h, reversed(nullptr));
    } else {
      const Control u = mode.fixed(t1 - s - 0.5 * h);
      G = ode::rk4_step(G, s, h, reversed(&u));
    }
    if (!ode::all_finite(G)) {
      std::ostringstream os;
      os << "integrate_backward: non-finite payoff at t=" << t1 - (k + 1) * h << " (dt=" << h
         << " too large relative to the rates?)";
      throw NumericalError(os.str());
    }
    states.push_back(G);
  }

  Trajectory traj;
  traj.dt = h;
  traj.times.resize(grid.steps + 1);
  traj.states.resize(grid.steps + 1);
  for (int k = 0; k <= grid.steps; ++k) {
    traj.times[k] = grid.at(k);
    traj.states[k] = std::move(states[grid.steps - k]);
  }
  return traj;
}

}  // namespace mfg
