#pragma once

#include <optional>

#include "mfg/model.hpp"

namespace mfg {

/// Hierarchy chain of one behaviour level: the tridiagonal generator A_j with
/// column sums zero, so the kinetic equations of column j read x' = A_j x.
struct LevelChain {
  int j = 0;
  Matrix A;     // n x n
  Vector up;    // up(i)   = q+ at level i,     i < n-1
  Vector down;  // down(i) = q- at level i + 1, i < n-1
  bool detailed_balance = false;

  int size() const noexcept { return static_cast<int>(A.rows()); }
  /// Detailed-balance rates q_i = q+_i = q-_{i+1}.
  const Vector& q() const noexcept { return up; }
};

LevelChain build_level_chain(int j, const GameConfig& cfg);

/// Interaction generator E_j(x), same layout as A_j with rates
/// sum_k q(+/-)k_ij x_ik. Linear in x, so E_j(x0 + d x1) = E_j(x0) + d E_j(x1).
Matrix interaction_matrix(int j, const Matrix& x, const GameConfig& cfg);

/// Kernel of A_j by the ascending product from level 1, scaled to the given mass.
Vector kernel(const LevelChain& chain, double mass);

/// Same kernel by the descending product from level n.
Vector kernel_descending(const LevelChain& chain, double mass);

/// Closed-form complement solve: the mean-zero z built from partial sums of y,
/// exactly as written (z_1 from the weighted sum, then the running differences).
/// Satisfies A z = s y with s = complement_sign().
Vector complement_closed_form(const LevelChain& chain, const Vector& y);

/// Sign s in A * complement_closed_form(y) = s * y, established once per
/// process by a residual check on a two-level probe.
int complement_sign();

/// Unique mean-zero z with A z = rhs. Requires detailed balance and sum(rhs) = 0.
/// Throws AssumptionError when rhs is not mean-zero and NumericalError when the
/// residual check fails.
Vector solve_on_complement(const LevelChain& chain, const Vector& rhs);

/// g0: each column filled with sum_i w~_ij / n.
Matrix g0_term(const GameConfig& cfg);

/// g1: mean-zero solution of A_j g1 = g0 - w~ for every column.
Matrix g1_term(const GameConfig& cfg);

/// The indicator-weighted closed form for g1 as it is usually quoted.
/// Kept as a diagnostic: it does not reproduce g1_term (see StationarySolution).
Matrix g1_indicator_form(const GameConfig& cfg);

/// Second payoff term on the complement. ID1: A g2 = g1. ID2: A g2 = g1 - E0^T g1
/// + fH sum_k q-k x0. Throws AssumptionError when the ID2 solvability sum exceeds 1e-9.
Matrix g2_term(const GameConfig& cfg, Regime regime);

/// ID2 solvability sum per column: sum_i (g1 - E0^T g1 + fH sum_k q-k x0)_ij.
Vector id2_solvability(const GameConfig& cfg);

/// First-order density correction; only the dominant column is nonzero.
Matrix x1_correction(const GameConfig& cfg);

/// Leading-order density: uniform 1/n on the dominant column.
Matrix leading_density(const GameConfig& cfg, int b);

struct StationarySolution {
  Matrix x0;
  Matrix x1;
  Matrix g0;
  Matrix g1;
  std::optional<Matrix> g2;
  int b = 0;
  Regime regime = Regime::ID1;
  double delta = 0.0;
  double delta_int = 0.0;
  double delta_dis = 0.0;

  Matrix g;  // g0 / delta_dis + g1 (+ delta_dis g2)

  double strategic_margin = 0.0;    // max_{k != b} sum_i w~_ik - sum_i w~_ib (< 0 required)
  double consistency_margin = 0.0;  // fee-aware margin at (g, x)
  int complement_sign = 0;
  double g1_indicator_discrepancy = 0.0;
  double hjb_residual = 0.0;      // sup norm of the stationary HJB at (g, x)
  double kinetic_residual = 0.0;  // sup norm of the stationary kinetics at x

  /// x0 + delta_int x1
  Matrix density() const { return x0 + delta_int * x1; }
};

/// Checks detailed balance with positive rates, nonzero column sums of w~ and a
/// unique dominant level. Throws AssumptionError naming the first failure.
void certify_assumptions(const GameConfig& cfg);

/// Assembles the expansion for the configured regime.
StationarySolution stationary_solution(const GameConfig& cfg);

/// Sup norm of the stationary HJB equation with zero control.
double stationary_hjb_residual(const Matrix& g, const Matrix& x, const GameConfig& cfg);

}  // namespace mfg
