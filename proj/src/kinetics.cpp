#include "mfg/kinetics.hpp"

#include <cmath>
#include <sstream>

#include "mfg/ode.hpp"

namespace mfg {

namespace {

constexpr double kDriftThreshold = 1e-12;

void check_inputs(const Matrix& x, const Control& u, const GameConfig& cfg, const char* what) {
  require_shape(x, cfg.n, cfg.m, what);
  if (u.levels() != cfg.n || u.behaviours() != cfg.m)
    throw std::invalid_argument(std::string(what) + ": control dimension mismatch");
}

// lambda * sum_k (u_{ik->ij} x_ik - u_{ij->ik} x_ij)
void add_decision_flows(Matrix& dx, const Matrix& x, const Control& u, double lambda) {
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) {
      const int k = u.target(i, j);
      if (k == Control::kStay) continue;
      const double flow = lambda * x(i, j);
      dx(i, j) -= flow;
      dx(i, k) += flow;
    }
  }
}

// Sum_k q(i, j, k) x_ik
double stimulus(const RateTensor& q, const Matrix& x, int i, int j) {
  double s = 0.0;
  for (int k = 0; k < x.cols(); ++k) s += q(i, j, k) * x(i, k);
  return s;
}

void project(Matrix& x, ProjectionStats& stats) {
  bool clamped = false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x.data()[i] < 0.0) {
      x.data()[i] = 0.0;
      clamped = true;
    }
  }
  if (clamped) ++stats.clamped;
  const double drift = std::abs(x.sum() - 1.0);
  stats.max_drift = std::max(stats.max_drift, drift);
  if (drift > kDriftThreshold) {
    x /= x.sum();
    ++stats.renormalized;
  }
}

}  // namespace

ControlProvider constant_control(Control u) {
  return [u = std::move(u)](double) { return u; };
}

Matrix kinetic_rhs(const Matrix& x, const Control& u, const GameConfig& cfg) {
  check_inputs(x, u, cfg, "kinetic_rhs");
  if (cfg.is_sink_variant())
    throw std::invalid_argument("kinetic_rhs: config selects the sink variant");
  const int n = cfg.n;
  const int m = cfg.m;
  Matrix dx = Matrix::Zero(n, m);
  add_decision_flows(dx, x, u, cfg.lambda);

  // Each hierarchy move is accumulated once as an outflow and once as an inflow,
  // so boundary rates beyond the chain are never used.
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i + 1 < n) {
        double rate = cfg.q_up(i, j);
        if (cfg.delta_int != 0.0) rate += cfg.delta_int * stimulus(cfg.q_up_evo, x, i, j);
        const double flow = rate * x(i, j);
        dx(i, j) -= flow;
        dx(i + 1, j) += flow;
      }
      if (i > 0) {
        double rate = cfg.q_down(i, j);
        if (cfg.delta_int != 0.0) rate += cfg.delta_int * stimulus(cfg.q_down_evo, x, i, j);
        const double flow = rate * x(i, j);
        dx(i, j) -= flow;
        dx(i - 1, j) += flow;
      }
    }
  }
  return dx;
}

Matrix kinetic_rhs_sink(const Matrix& x, const Control& u, const GameConfig& cfg) {
  check_inputs(x, u, cfg, "kinetic_rhs_sink");
  if (!cfg.q_sink) throw std::invalid_argument("kinetic_rhs_sink: q_sink is absent");
  const int n = cfg.n;
  const int m = cfg.m;
  Matrix dx = Matrix::Zero(n, m);
  add_decision_flows(dx, x, u, cfg.lambda);

  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i + 1 < n) {
        double rate = cfg.q_up(i, j);
        if (cfg.delta_int != 0.0) rate += cfg.delta_int * stimulus(cfg.q_up_evo, x, i, j);
        const double flow = rate * x(i, j);
        dx(i, j) -= flow;
        dx(i + 1, j) += flow;
      }
      if (i > 0) {
        double rate = cfg.q_sink->rates(i, j);
        if (cfg.delta_int != 0.0) rate += cfg.delta_int * stimulus(cfg.q_sink->evo, x, i, j);
        const double flow = rate * x(i, j);
        dx(i, j) -= flow;
        dx(0, j) += flow;
      }
    }
  }
  return dx;
}

Matrix occupation_drift(const Matrix& x, const Control& u, const GameConfig& cfg) {
  return cfg.is_sink_variant() ? kinetic_rhs_sink(x, u, cfg) : kinetic_rhs(x, u, cfg);
}

Trajectory integrate_forward(const Occupation& x0, const ControlProvider& control, double t0,
                             double t1, double dt, const GameConfig& cfg) {
  require_shape(x0.matrix(), cfg.n, cfg.m, "integrate_forward");
  const auto grid = ode::TimeGrid::cover(t0, t1, dt);
  const double h = grid.step();

  Trajectory traj;
  traj.dt = h;
  traj.times.reserve(grid.steps + 1);
  traj.states.reserve(grid.steps + 1);
  traj.times.push_back(t0);
  traj.states.push_back(x0.matrix());

  Matrix x = x0.matrix();
  for (int k = 0; k < grid.steps; ++k) {
    const double t = grid.at(k);
    const Control u = control(t + 0.5 * h);
    x = ode::rk4_step(x, t, h, [&](double, const Matrix& y) { return occupation_drift(y, u, cfg); });
    if (!ode::all_finite(x)) {
      std::ostringstream os;
      os << "integrate_forward: non-finite state at t=" << grid.at(k + 1) << " (dt=" << h
         << " too large?)";
      throw NumericalError(os.str());
    }
    project(x, traj.projection);
    traj.times.push_back(grid.at(k + 1));
    traj.states.push_back(x);
  }
  return traj;
}

double stationary_residual(const Matrix& x, const GameConfig& cfg) {
  return occupation_drift(x, Control(cfg.n, cfg.m), cfg).cwiseAbs().maxCoeff();
}

}  // namespace mfg
