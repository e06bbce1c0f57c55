#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mfg/kinetics.hpp"
#include "mfg/model.hpp"

namespace mfg {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Agent counts n_ij, summing to N.
struct CountState {
  CountMatrix counts;
  std::int64_t N = 0;

  /// Largest-remainder rounding of N x: floors first, then the leftover agents go
  /// to the largest fractional parts (ties to the lowest column-major index).
  static CountState from_density(const Matrix& x, std::int64_t N);

  Matrix density() const;
};

struct Transition {
  enum class Kind { Pressure, Interaction, Decision, Sink };
  int from_i = 0;
  int from_j = 0;
  int to_i = 0;
  int to_j = 0;
  double rate = 0.0;
  Kind kind = Kind::Pressure;
};

/// Every transition with a positive rate. Interaction rates are
/// n_ij delta_int sum_k q^k n_ik / N; the sum includes the agent itself.
std::vector<Transition> enumerate_transitions(const CountState& s, const Control& u,
                                              const GameConfig& cfg);

/// Piecewise-constant control schedule. The control is constant between
/// consecutive change times.
struct Policy {
  ControlProvider control;
  std::vector<double> change_times;  // increasing

  static Policy fixed(Control u);
  /// Best response to a payoff path, one control per interval, as the solver does.
  static Policy from_payoff(const std::vector<double>& times, const std::vector<Matrix>& g,
                            const GameConfig& cfg);
};

struct SamplePath {
  std::vector<double> times;          // uniform output grid
  std::vector<CountMatrix> counts;    // state at each output time
  std::uint64_t events = 0;
  std::uint64_t event_hash = 0;       // FNV-1a over event times and moves
  double first_jump = -1.0;           // time of the first event, -1 when none happened
};

/// Exact event-driven simulation up to T, sampled every dt_out.
SamplePath simulate(const CountState& s0, const Policy& policy, double T, double dt_out,
                    std::uint64_t seed, const GameConfig& cfg);

inline constexpr const char* kRngName = "mt19937_64";

struct EnsembleResult {
  std::vector<double> times;
  std::vector<Matrix> mean;     // mean density per output time
  std::vector<Matrix> std_error;  // standard error of the mean
  std::vector<std::uint64_t> hashes;  // per replication, in replication order
  std::uint64_t combined_hash = 0;
  std::vector<SamplePath> paths;      // kept only when requested
  std::int64_t N = 0;
  int replications = 0;
  std::uint64_t seed = 0;
};

struct EnsembleOptions {
  int threads = 0;  // 0: hardware concurrency
  bool keep_paths = false;
};

/// Replication r uses seed + r; replications run in parallel and are merged by index.
EnsembleResult run_ensemble(const Matrix& x0, std::int64_t N, const Policy& policy, double T,
                            double dt_out, int replications, std::uint64_t seed,
                            const GameConfig& cfg, const EnsembleOptions& options = {});

struct ConvergenceRow {
  std::int64_t N = 0;
  double rmse = 0.0;
  double max_z = 0.0;  // largest |mean - ode| / stderr over checkpoints and states
  int z_exceed = 0;    // count of |z| > 3
  int z_tests = 0;
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  std::vector<double> checkpoints;
  double slope = 0.0;  // least-squares slope of log rmse against log N
};

/// RMSE between the ensemble mean and the ODE at `checkpoints` equally spaced
/// times in (0, T]. The ODE starts from the rounded initial counts of each N.
ConvergenceStudy convergence_study(const GameConfig& cfg, const Control& u, const Matrix& x0, double T,
                                   const std::vector<std::int64_t>& N_list, int replications,
                                   std::uint64_t seed, int checkpoints = 10,
                                   const EnsembleOptions& options = {});

}  // namespace mfg
