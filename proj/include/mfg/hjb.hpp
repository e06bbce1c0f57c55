#pragma once

#include <functional>
#include <limits>

#include "mfg/kinetics.hpp"

namespace mfg {

/// Occupation in force at time t; evaluated at RK4 stage times.
using OccupationProvider = std::function<Matrix(double t)>;

OccupationProvider constant_occupation(Matrix x);

/// Net gain a switch must exceed before it is taken.
inline constexpr double kSwitchThreshold = 1e-12;

/// Time derivative of the discounted payoff under the supplied control:
///
///   g' = delta_dis g - w - lambda u (g_ik - g_ij - fB_jk)
///        - q+ (g_{i+1} - g_i) - q- (g_{i-1} - g_i - fH_i)
///        - delta_int sum_k x_ik (q+k (g_{i+1} - g_i) + q-k (g_{i-1} - g_i - fH_i))
///
/// Terms that would leave the hierarchy are omitted.
Matrix hjb_rhs(const Matrix& g, const Matrix& x, const Control& u, const GameConfig& cfg);

/// Pointwise best response to g. A row switches to the lowest-index k with the
/// largest net gain g_ik - g_ij - fB_jk, and only when that gain exceeds 1e-12.
Control optimal_control(const Matrix& g, const GameConfig& cfg);

/// max over occupied (x_ij > 1e-9) states and k != j of g_ik - g_ij - fB_jk.
/// Nonpositive certifies that nobody wants to switch. -inf when no pair exists.
double consistency_margin(const Matrix& g, const Matrix& x, const GameConfig& cfg);

/// How the backward pass chooses the control.
struct BackwardControl {
  ControlProvider fixed;  // empty: recompute the best response at every stage

  static BackwardControl optimizing() { return {}; }
  static BackwardControl fixed_control(ControlProvider u) { return {std::move(u)}; }
  bool is_optimizing() const noexcept { return !fixed; }
};

/// Integrates the payoff backward from gT at t1 down to t0 with RK4 on the
/// time-reversed system. The returned trajectory is in increasing time order.
Trajectory integrate_backward(const Matrix& gT, const OccupationProvider& occupation, double t0,
                              double t1, double dt, const GameConfig& cfg,
                              const BackwardControl& mode);

}  // namespace mfg
