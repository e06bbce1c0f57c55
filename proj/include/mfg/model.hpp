#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mfg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Malformed or inconsistent model input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A modelling assumption needed by an analytic result does not hold.
class AssumptionError : public std::runtime_error {
 public:
  AssumptionError(std::string assumption, const std::string& what)
      : std::runtime_error(assumption + ": " + what), assumption_(std::move(assumption)) {}
  const std::string& assumption() const noexcept { return assumption_; }

 private:
  std::string assumption_;
};

/// Integration or linear algebra produced a non-finite or unreliable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense rank-3 array indexed (level i, behaviour j, behaviour k).
///
/// Holds the interaction rates: entry (i, j, k) is the rate at which an agent
/// at (i, k) stimulates a hierarchy move of an agent at (i, j).
class RateTensor {
 public:
  RateTensor() = default;
  RateTensor(int levels, int behaviours)
      : levels_(levels),
        behaviours_(behaviours),
        data_(static_cast<std::size_t>(levels) * behaviours * behaviours, 0.0) {}

  double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }

  int levels() const noexcept { return levels_; }
  int behaviours() const noexcept { return behaviours_; }
  std::span<const double> data() const noexcept { return data_; }
  bool empty() const noexcept { return data_.empty(); }

 private:
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * behaviours_ + j) * behaviours_ + k;
  }

  int levels_ = 0;
  int behaviours_ = 0;
  std::vector<double> data_;
};

enum class Regime { ID1, ID2, ID3 };

std::string to_string(Regime regime);
std::optional<Regime> parse_regime(std::string_view text);

struct RegimeSpec {
  Regime regime = Regime::ID1;
  double delta = 0.0;
};

/// Rates of the variant where downgrades send an agent straight to level 1.
struct SinkRates {
  Matrix rates;     // n x m
  RateTensor evo;   // n x m x m
};

/// All model constants. Indices are 0-based; file formats and reports are 1-based.
struct GameConfig {
  int n = 0;  // hierarchy levels
  int m = 0;  // behaviour levels

  Matrix q_up;          // n x m, pressure upgrade rates, last row zero
  Matrix q_down;        // n x m, pressure downgrade rates, first row zero
  RateTensor q_up_evo;  // interaction upgrade rates, slice i = n-1 zero
  RateTensor q_down_evo;
  std::optional<SinkRates> q_sink;

  Matrix w;      // n x m rewards per unit time
  Matrix fee_B;  // m x m elective switching fees, zero diagonal
  Vector fee_H;  // n enforced downgrade fines

  double lambda = 1.0;
  double delta_int = 0.0;
  double delta_dis = 1.0;
  std::optional<RegimeSpec> regime;
  bool detailed_balance = false;

  /// Config of the given shape with every rate, reward and fee zero.
  static GameConfig zeros(int n, int m);

  bool is_sink_variant() const noexcept { return q_sink.has_value(); }
};

/// Couples delta_int and delta_dis to a base parameter according to the regime.
void apply_regime(GameConfig& cfg, Regime regime, double delta);

/// Pure-strategy decision tensor u_{ij -> ik}: each (i, j) either stays or
/// switches to exactly one other behaviour.
class Control {
 public:
  Control() = default;
  Control(int n, int m) : n_(n), m_(m), target_(static_cast<std::size_t>(n) * m, kStay) {}

  static constexpr int kStay = -1;

  int levels() const noexcept { return n_; }
  int behaviours() const noexcept { return m_; }

  /// Behaviour switched to from (i, j), or kStay.
  int target(int i, int j) const { return target_[static_cast<std::size_t>(i) * m_ + j]; }
  void set_target(int i, int j, int k);
  void stay(int i, int j) { target_[static_cast<std::size_t>(i) * m_ + j] = kStay; }

  /// Entry u_{ij -> ik} in {0, 1}.
  double u(int i, int j, int k) const { return target(i, j) == k ? 1.0 : 0.0; }

  bool is_zero() const;
  std::size_t switch_count() const;

  friend bool operator==(const Control&, const Control&) = default;

 private:
  int n_ = 0;
  int m_ = 0;
  std::vector<int> target_;
};

/// Occupation densities x_ij on the probability simplex.
class Occupation {
 public:
  static constexpr double kMassTolerance = 1e-9;

  /// Throws ConfigError when an entry is negative or the mass is not 1.
  explicit Occupation(Matrix x);

  static Occupation uniform(int n, int m);

  const Matrix& matrix() const noexcept { return x_; }
  int levels() const noexcept { return static_cast<int>(x_.rows()); }
  int behaviours() const noexcept { return static_cast<int>(x_.cols()); }

 private:
  Matrix x_;
};

/// Names the offending field and index (1-based).
struct Violation {
  std::string field;
  std::string message;
};

std::vector<Violation> validate(const GameConfig& cfg);

/// w~_ij = w_ij - q^-_ij * f^H_i
Matrix effective_rewards(const GameConfig& cfg);

struct DominantLevel {
  int b = 0;                          // argmax over column sums of w~ (0-based)
  bool unique = false;
  std::vector<int> zero_sum_levels;   // levels where the column sum vanishes
  Vector column_sums;

  bool nondegenerate() const noexcept { return zero_sum_levels.empty(); }
};

DominantLevel dominant_level(const GameConfig& cfg);

/// Smallest strictly positive rate among pressure, interaction and sink rates.
double min_positive_rate(const GameConfig& cfg);

/// Throws ConfigError listing every violation when validate() is non-empty.
void require_valid(const GameConfig& cfg);

void require_shape(const Matrix& a, int rows, int cols, const char* what);

}  // namespace mfg
