#include <doctest.h>

#include <cmath>
#include <limits>

#include "mfg/kinetics.hpp"
#include "mfg/solver.hpp"
#include "mfg/stationary.hpp"
#include "support/oracles.hpp"

using namespace mfg;

namespace {

// Equal chains in both columns and nearly equal rewards: the stationary payoff
// differs across columns by 0.2 at delta = 0.05, well inside a unit fee.
GameConfig near_tie(double delta = 0.05) {
  GameConfig cfg = GameConfig::zeros(3, 2);
  cfg.q_up.topRows(2).setOnes();
  cfg.q_down.bottomRows(2).setOnes();
  cfg.w << 1.0, 1.01, 2.0, 2.01, 3.0, 3.01;
  cfg.fee_B << 0, 1, 1, 0;
  cfg.detailed_balance = true;
  apply_regime(cfg, Regime::ID1, delta);
  return cfg;
}

// Behaviour 2 pays far more and switching is cheap, so everybody moves.
GameConfig switching() {
  GameConfig cfg = GameConfig::zeros(2, 2);
  cfg.q_up.row(0) << 1.0, 1.0;
  cfg.q_down.row(1) << 1.0, 1.0;
  cfg.w << 0.0, 2.0, 0.0, 2.0;
  cfg.fee_B << 0, 0.1, 0.1, 0;
  cfg.lambda = 2.0;
  cfg.delta_dis = 0.5;
  cfg.detailed_balance = true;
  return cfg;
}

}  // namespace

TEST_CASE("cone_check examples") {
  GameConfig cfg = GameConfig::zeros(2, 3);
  cfg.fee_B << 0, 1, 2, 1.5, 0, 1, 2, 1.2, 0;
  CHECK(cone_check(Matrix::Constant(2, 3, 4.0), cfg) == doctest::Approx(-1.0));
  CHECK(cone_violations(Matrix::Constant(2, 3, 4.0), cfg).empty());

  Matrix g = Matrix::Zero(2, 3);
  g(1, 1) = 1.0;  // g_2,2 = g_2,1 + fB_12
  CHECK(cone_check(g, cfg) == doctest::Approx(0.0));
  g(1, 1) = 1.1;
  const auto v = cone_violations(g, cfg, 3.0);
  REQUIRE(v.size() == 1);
  CHECK(v[0].t == 3.0);
  CHECK(v[0].i == 1);
  CHECK(v[0].alpha == 0);
  CHECK(v[0].beta == 1);
  CHECK(v[0].margin == doctest::Approx(0.1));

  CHECK(cone_check(Matrix::Zero(2, 1), GameConfig::zeros(2, 1)) == -std::numeric_limits<double>::infinity());
  CHECK(cone_check(stationary_solution(near_tie()).g, near_tie()) <= 0.0);
}

TEST_CASE("rate ordering examples") {
  GameConfig cfg = GameConfig::zeros(3, 2);
  cfg.q_up.topRows(2) << 1, 2, 2, 3;
  auto r = rate_ordering_check(cfg);
  REQUIRE(r.pairs.size() == 1);
  CHECK(r.pairs[0].ordering == RateOrdering::AlphaBelowBeta);
  CHECK(r.holds());

  cfg.q_up.topRows(2) << 2, 1, 3, 2;
  CHECK(rate_ordering_check(cfg).pairs[0].ordering == RateOrdering::BetaBelowAlpha);

  cfg.q_up.topRows(2) << 1, 2, 3, 2;
  r = rate_ordering_check(cfg);
  CHECK(r.pairs[0].ordering == RateOrdering::Mixed);
  CHECK_FALSE(r.holds());

  CHECK(rate_ordering_check(GameConfig::zeros(3, 1)).pairs.empty());
  CHECK(rate_ordering_check(GameConfig::zeros(3, 1)).holds());
}

TEST_CASE("boundary tangent condition") {
  oracle::Rng rng(51);
  for (int t = 0; t < 10; ++t) {
    GameConfig cfg = oracle::random_db_config(rng, 4, 3);
    apply_regime(cfg, Regime::ID3, 0.05);
    const Matrix g = g0_term(cfg) / cfg.delta_dis + g1_term(cfg);
    const Matrix wt = effective_rewards(cfg);
    const int j = static_cast<int>(rng() % 4);
    int a = 0, b = 1;
    if (g(j, a) > g(j, b)) std::swap(a, b);
    cfg.fee_B(a, b) = g(j, b) - g(j, a);
    const Matrix x = Matrix::Constant(4, 3, 1.0 / 12);
    const auto tc = boundary_tangent_condition(g, x, cfg, j, a, b);

    // The leading part reduces to the reward deviations from the column means,
    // because A_c g1 = g0 - w~ column by column.
    const double want = (wt.col(b).mean() - wt(j, b)) - (wt.col(a).mean() - wt(j, a));
    CHECK(tc.leading == doctest::Approx(want).epsilon(1e-9));
    const double full = cfg.delta_dis * (g(j, a) - g(j, b)) - wt(j, a) + wt(j, b) + tc.leading;
    CHECK(tc.full == doctest::Approx(full).epsilon(1e-9));

    cfg.fee_B(a, b) += 1e-6;
    CHECK_THROWS_AS(boundary_tangent_condition(g, x, cfg, j, a, b), std::invalid_argument);
  }
}

TEST_CASE("solve_mfg from the stationary point converges at once") {
  const GameConfig cfg = near_tie();
  const auto s = stationary_solution(cfg);
  const double T = 40.0;
  const auto r = solve_mfg(Occupation(s.density()), s.g, T, 0.05, cfg);
  CHECK(r.converged);
  CHECK(r.status == SolveStatus::Converged);
  CHECK(r.iterations == 1);
  for (const auto& u : r.controls) CHECK(u.is_zero());
  for (const auto& u : r.node_controls) CHECK(u.is_zero());
  CHECK(r.cone_violations.empty());
  const auto tp = turnpike_metrics(r, cfg);
  CHECK(tp.middle_sup < 1e-14);
  CHECK(tp.switch_fraction == 0.0);
  REQUIRE(tp.g_middle_sup);
}

TEST_CASE("solve_mfg keeps the stay control from a generic start") {
  const GameConfig cfg = near_tie();
  oracle::Rng rng(52);
  const auto s = stationary_solution(cfg);
  const auto r = solve_mfg(Occupation(oracle::random_simplex(rng, 3, 2)), s.g, 60.0, 0.05, cfg);
  CHECK(r.converged);
  CHECK(turnpike_metrics(r, cfg).switch_fraction == 0.0);
  for (const auto& g : r.g) CHECK(cone_check(g, cfg) <= 0.0);
  // Column masses are conserved and each column relaxes to uniform.
  const auto tp = turnpike_metrics(r, cfg);
  CHECK(tp.plateau < 1e-8);
  CHECK(tp.max_ripple <= 1e-10);
}

TEST_CASE("single behaviour needs one iteration") {
  oracle::Rng rng(53);
  const GameConfig cfg = oracle::random_db_config(rng, 4, 1);
  const auto r = solve_mfg(Occupation(oracle::random_simplex(rng, 4, 1)), Matrix::Zero(4, 1), 5.0, 0.01, cfg);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
}

TEST_CASE("solve_mfg with switching reaches a self-consistent control") {
  const GameConfig cfg = switching();
  const Occupation x0(Matrix::Constant(2, 2, 0.25));
  const auto r = solve_mfg(x0, Matrix::Zero(2, 2), 4.0, 0.01, cfg);
  REQUIRE(r.converged);
  CHECK(r.iterations >= 2);
  CHECK(r.controls.front().target(0, 0) == 1);
  CHECK(r.x.back().col(1).sum() > 0.99);

  // Re-running forward with the stored control reproduces the stored path.
  const double h = r.dt();
  const auto again = integrate_forward(
      x0, [&](double t) { return r.controls[std::min<std::size_t>(r.controls.size() - 1, std::floor(t / h))]; }, 0.0,
      4.0, h, cfg);
  double diff = 0.0;
  for (std::size_t k = 0; k < again.size(); ++k) diff = std::max(diff, (again.states[k] - r.x[k]).cwiseAbs().maxCoeff());
  CHECK(diff < 1e-8);

  // Every interval control is the best response to the payoff it came from.
  for (std::size_t k = 0; k < r.controls.size(); ++k)
    CHECK(r.controls[k] == optimal_control(0.5 * (r.g[k] + r.g[k + 1]), cfg));
}

TEST_CASE("solve_mfg reports an exhausted iteration budget") {
  SolveOptions opt;
  opt.max_iter = 1;
  const auto r = solve_mfg(Occupation(Matrix::Constant(2, 2, 0.25)), Matrix::Zero(2, 2), 4.0, 0.01, switching(), opt);
  CHECK_FALSE(r.converged);
  CHECK(r.status == SolveStatus::MaxIterations);
  CHECK(to_string(r.status) == "max_iterations");
}

TEST_CASE("solve_mfg argument checks") {
  const GameConfig cfg = switching();
  const Occupation x0(Matrix::Constant(2, 2, 0.25));
  CHECK_THROWS_AS(solve_mfg(x0, Matrix::Zero(2, 2), 0.0, 0.01, cfg), std::invalid_argument);
  SolveOptions bad;
  bad.damping = 0.0;
  CHECK_THROWS_AS(solve_mfg(x0, Matrix::Zero(2, 2), 1.0, 0.01, cfg, bad), std::invalid_argument);
  CHECK_THROWS_AS(solve_mfg(x0, Matrix::Zero(3, 2), 1.0, 0.01, cfg), std::invalid_argument);
  GameConfig broken = cfg;
  broken.q_up(1, 0) = 1.0;
  CHECK_THROWS_AS(solve_mfg(x0, Matrix::Zero(2, 2), 1.0, 0.01, broken), ConfigError);
}

TEST_CASE("turnpike reference and default horizon") {
  Matrix x(2, 2);
  x << 0.1, 0.3, 0.2, 0.4;
  const Matrix ref = turnpike_reference(x);
  CHECK(ref(0, 0) == doctest::Approx(0.15));
  CHECK(ref(1, 1) == doctest::Approx(0.35));
  GameConfig cfg = switching();
  cfg.q_up(0, 1) = 0.25;
  cfg.q_down(1, 1) = 0.25;
  CHECK(default_horizon(cfg) == doctest::Approx(200.0));
  CHECK_THROWS_AS(default_horizon(GameConfig::zeros(2, 2)), ConfigError);
}
