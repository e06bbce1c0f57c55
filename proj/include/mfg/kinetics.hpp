#pragma once

#include <functional>
#include <vector>

#include "mfg/model.hpp"

namespace mfg {

/// Control in force at time t. Sampled once per step, at the step midpoint.
using ControlProvider = std::function<Control(double t)>;

ControlProvider constant_control(Control u);

/// Re-projection events applied to stored samples.
struct ProjectionStats {
  double max_drift = 0.0;  // largest |sum x - 1| seen before re-projection
  int renormalized = 0;    // samples rescaled because drift exceeded 1e-12
  int clamped = 0;         // samples with negative entries clamped to zero
};

/// Time-indexed samples; states are occupations or payoffs depending on the producer.
struct Trajectory {
  std::vector<double> times;
  std::vector<Matrix> states;
  double dt = 0.0;
  ProjectionStats projection;

  std::size_t size() const noexcept { return times.size(); }
  const Matrix& back() const { return states.back(); }
};

/// Right-hand side of the neighbour-transition kinetic equations.
Matrix kinetic_rhs(const Matrix& x, const Control& u, const GameConfig& cfg);

/// Right-hand side for the variant where downgrades jump to level 1.
Matrix kinetic_rhs_sink(const Matrix& x, const Control& u, const GameConfig& cfg);

/// Selects the dynamics of the configured model variant.
Matrix occupation_drift(const Matrix& x, const Control& u, const GameConfig& cfg);

/// Classical RK4 with fixed step from t0 to t1. The step is dt shortened so an
/// integer number of steps covers the interval.
Trajectory integrate_forward(const Occupation& x0, const ControlProvider& control, double t0,
                             double t1, double dt, const GameConfig& cfg);

/// Sup norm of the stationary kinetic condition with all decision terms removed.
double stationary_residual(const Matrix& x, const GameConfig& cfg);

}  // namespace mfg
