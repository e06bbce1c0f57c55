#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfg/hjb.hpp"
#include "mfg/model.hpp"

namespace mfg {

enum class SolveStatus { Converged, MaxIterations, Oscillating };

std::string to_string(SolveStatus status);

struct SolveOptions {
  double damping = 0.5;
  int max_iter = 100;
  double tolerance = 1e-8;
  double min_damping = 1.0 / 1024.0;  // oscillation is reported once halving goes below this
};

struct ConeViolation {
  double t = 0.0;
  int i = 0;  // 0-based
  int alpha = 0;
  int beta = 0;
  double margin = 0.0;
};

struct MfgSolveResult {
  std::vector<double> times;
  std::vector<Matrix> x;                 // pure forward path of the final control
  std::vector<Matrix> g;                 // optimizing backward pass against x
  std::vector<Control> controls;         // one per grid interval
  std::vector<Control> node_controls;    // best response to g at each stored time
  int iterations = 0;
  bool converged = false;
  SolveStatus status = SolveStatus::MaxIterations;
  double last_change = 0.0;    // sup-norm x-path change of the last iteration
  double damping = 0.0;        // damping in force at exit
  int oscillations = 0;        // period-2 cycles seen

  Matrix x_ref;                              // turnpike reference, see turnpike_reference
  std::vector<double> turnpike_distance;     // ||x(t) - x_ref||_inf
  std::vector<ConeViolation> cone_violations;

  double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

/// Per-column uniform density carrying the column masses of x0. Without
/// switching the column masses are conserved, so this is the fixed point the
/// zero-control flow approaches when interactions are switched off.
Matrix turnpike_reference(const Matrix& x0);

/// 50 / smallest positive rate.
double default_horizon(const GameConfig& cfg);

/// Forward-backward fixed-point iteration on a shared uniform grid.
MfgSolveResult solve_mfg(const Occupation& x0, const Matrix& gT, double T, double dt,
                         const GameConfig& cfg, const SolveOptions& options = {});

/// max over i and alpha != beta of g_i,beta - fB_alpha,beta - g_i,alpha.
/// Nonpositive means the stay control is optimal. -inf when m = 1.
double cone_check(const Matrix& g, const GameConfig& cfg);

/// Every triple with a positive cone margin.
std::vector<ConeViolation> cone_violations(const Matrix& g, const GameConfig& cfg, double t = 0.0);

struct TangentCondition {
  double full = 0.0;     // g'_ja - g'_jb from the zero-control payoff dynamics
  double leading = 0.0;  // the O(1/delta) part evaluated on g (rates times differences)
};

/// Tangent of the time-reversed payoff flow at a cone boundary point
/// g_jb - fB_ab = g_ja. Nonpositive values mean the flow stays inside the cone.
/// Throws std::invalid_argument when the triple is off the boundary by more than 1e-9.
TangentCondition boundary_tangent_condition(const Matrix& g, const Matrix& x, const GameConfig& cfg,
                                            int j, int alpha, int beta);

enum class RateOrdering { AlphaBelowBeta, BetaBelowAlpha, Mixed };

struct PairOrdering {
  int alpha = 0;
  int beta = 0;
  RateOrdering ordering = RateOrdering::Mixed;
  bool holds() const noexcept { return ordering != RateOrdering::Mixed; }
};

struct RateOrderingReport {
  std::vector<PairOrdering> pairs;  // alpha < beta
  bool holds() const noexcept {
    for (const auto& p : pairs)
      if (!p.holds()) return false;
    return true;
  }
};

/// Compares the detailed-balance rates q_i of every behaviour pair across all levels.
RateOrderingReport rate_ordering_check(const GameConfig& cfg);

struct TurnpikeSummary {
  std::vector<double> distance;     // d(t)
  double window_lo = 0.0;           // middle 80% of [0, T]
  double window_hi = 0.0;
  double middle_sup = 0.0;
  double plateau = 0.0;             // d(T)
  std::optional<std::vector<double>> g_distance;  // to the stationary expansion, when available
  std::optional<double> g_middle_sup;
  double switch_fraction = 0.0;     // share of intervals with a nonzero control
  double max_ripple = 0.0;          // largest increase of d while above twice the plateau
};

TurnpikeSummary turnpike_metrics(const MfgSolveResult& result, const GameConfig& cfg);

}  // namespace mfg
