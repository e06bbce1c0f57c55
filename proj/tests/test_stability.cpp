#include <doctest.h>

#include <cmath>

#include "mfg/kinetics.hpp"
#include "mfg/stability.hpp"
#include "support/oracles.hpp"

using namespace mfg;

TEST_CASE("two-by-two linearization with unit rates") {
  GameConfig cfg = GameConfig::zeros(2, 2);
  cfg.q_up.row(0).setOnes();
  cfg.q_down.row(1).setOnes();
  const Matrix L = build_reduced_linearization(cfg);
  REQUIRE(L.rows() == 3);
  Matrix a1(2, 2);
  a1 << -1, 1, 1, -1;
  CHECK(L.topLeftCorner(2, 2) == a1);
  // Last reduced row: level 1 of column 2 receives q-_22 x_22 = -(y1 + y2 + y3).
  CHECK(L(2, 0) == -1.0);
  CHECK(L(2, 1) == -1.0);
  CHECK(L(2, 2) == -2.0);
}

TEST_CASE("analytic Jacobian matches central differences") {
  oracle::Rng rng(41);
  oracle::RandomConfigOptions opt;
  opt.evo = 1.0;
  for (int t = 0; t < 5; ++t) {
    GameConfig cfg = oracle::random_db_config(rng, 3, 3, opt);
    cfg.delta_int = 0.5;
    const Matrix x = oracle::random_simplex(rng, 3, 3);
    const Matrix fd = oracle::fd_jacobian(
        [&](const Matrix& y) { return kinetic_rhs(y, Control(3, 3), cfg); }, x, 1e-5);
    CHECK((kinetic_jacobian(x, cfg) - fd).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("reduced linearization predicts the kinetics to second order") {
  oracle::Rng rng(42);
  for (int n = 2; n <= 4; ++n) {
    const GameConfig cfg = oracle::random_db_config(rng, n, n);
    const Matrix L = build_reduced_linearization(cfg);
    const Matrix xs = Matrix::Constant(n, n, 1.0 / (n * n));
    Vector y(n * n - 1);
    for (int k = 0; k < y.size(); ++k) y(k) = oracle::uniform(rng, -1.0, 1.0);
    const Matrix dx = lift_reduced(y, n, n);
    std::vector<double> eps{1e-3, 5e-4, 2.5e-4};
    std::vector<double> err;
    for (double e : eps) {
      const Matrix f = kinetic_rhs(xs + e * dx, Control(n, n), cfg);
      const Vector fy = Eigen::Map<const Vector>(f.data(), n * n).head(n * n - 1);
      err.push_back((fy - e * L * y).cwiseAbs().maxCoeff());
    }
    // Linear kinetics at delta_int = 0: the residual is rounding only.
    CHECK(err.back() < 1e-14);
  }

  // With interactions the error is quadratic.
  oracle::RandomConfigOptions opt;
  opt.evo = 1.0;
  GameConfig cfg = oracle::random_db_config(rng, 3, 3, opt);
  cfg.delta_int = 0.3;
  const Matrix xs = Matrix::Constant(3, 3, 1.0 / 9);
  const Matrix L = build_reduced_linearization(cfg, xs);
  Vector y(8);
  for (int k = 0; k < 8; ++k) y(k) = oracle::uniform(rng, -1.0, 1.0);
  const Matrix f0 = kinetic_rhs(xs, Control(3, 3), cfg);
  const Vector base = Eigen::Map<const Vector>(f0.data(), 9).head(8);
  std::vector<double> eps{1e-3, 5e-4, 2.5e-4};
  std::vector<double> err;
  for (double e : eps) {
    const Matrix f = kinetic_rhs(xs + e * lift_reduced(y, 3, 3), Control(3, 3), cfg);
    const Vector fy = Eigen::Map<const Vector>(f.data(), 9).head(8);
    err.push_back((fy - base - e * L * y).cwiseAbs().maxCoeff());
  }
  CHECK(oracle::loglog_slope(eps, err) > 1.9);
}

TEST_CASE("lifted kernel directions are annihilated") {
  oracle::Rng rng(43);
  for (int n = 2; n <= 4; ++n) {
    const GameConfig cfg = oracle::random_db_config(rng, n, n);
    const Matrix L = build_reduced_linearization(cfg);
    const auto dirs = lifted_kernel_directions(n, n);
    CHECK(dirs.size() == static_cast<std::size_t>(n - 1));
    for (const auto& v : dirs) {
      CHECK((L * v).cwiseAbs().maxCoeff() < 1e-14);
      CHECK(std::abs(lift_reduced(v, n, n).sum()) < 1e-15);
    }
  }
}

TEST_CASE("spectrum of a single chain block") {
  Matrix a(2, 2);
  a << -1, 1, 1, -1;
  const auto r = spectrum(a);
  REQUIRE(r.dimension() == 2);
  CHECK(r.eigenvalues[0].real() == doctest::Approx(-2.0));
  CHECK(std::abs(r.eigenvalues[1]) < 1e-14);
  CHECK(r.zero_count == 1);
  CHECK(r.negative_count == 1);
  CHECK(r.geometric_multiplicity_zero == 1);
  CHECK(r.balanced());
  CHECK_THROWS_AS(spectrum(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("spectral counts for random detailed-balance configs") {
  oracle::Rng rng(44);
  for (int n = 2; n <= 4; ++n)
    for (int t = 0; t < 5; ++t) {
      const GameConfig cfg = oracle::random_db_config(rng, n, n);
      const auto r = spectrum(build_reduced_linearization(cfg));
      CHECK(r.dimension() == n * n - 1);
      CHECK(r.zero_count == n - 1);
      CHECK(r.negative_count == n * (n - 1));
      CHECK(r.positive_count == 0);
      CHECK(r.imaginary_count == 0);
      CHECK(r.geometric_multiplicity_zero == n - 1);
      CHECK(r.spectral_abscissa <= r.tol_zero);
      CHECK(numerical_rank(build_reduced_linearization(cfg)) == n * n - 1 - (n - 1));
    }
}

TEST_CASE("perturbations stay bounded and settle on the null space") {
  oracle::Rng rng(45);
  const GameConfig cfg = oracle::random_db_config(rng, 3, 3);
  const Matrix xs = Matrix::Constant(3, 3, 1.0 / 9);
  Vector y(8);
  for (int k = 0; k < 8; ++k) y(k) = oracle::uniform(rng, -1.0, 1.0);
  const Matrix x0 = xs + 0.05 * lift_reduced(y, 3, 3);
  const auto traj = integrate_forward(Occupation(x0), constant_control(Control(3, 3)), 0.0, 40.0, 0.01, cfg);
  const double start = (x0 - xs).norm();
  for (const auto& x : traj.states) CHECK((x - xs).norm() <= start * (1.0 + 1e-9));
  // Each column relaxes to its own uniform profile with the initial mass.
  const Matrix& end = traj.back();
  for (int j = 0; j < 3; ++j)
    CHECK((end.col(j).array() - x0.col(j).sum() / 3).abs().maxCoeff() < 1e-8);
}

TEST_CASE("displayed last block against the elimination") {
  oracle::Rng rng(46);
  const GameConfig c3 = oracle::random_db_config(rng, 3, 3);
  const auto b3 = compare_last_block(c3);
  CHECK(b3.displayed.rows() == 2);
  CHECK(b3.mismatches.empty());

  const GameConfig c4 = oracle::random_db_config(rng, 4, 4);
  const auto b4 = compare_last_block(c4);
  const double qnn = c4.q_down(3, 3);
  REQUIRE(b4.mismatches.size() == 1);
  CHECK(b4.mismatches[0].row == 3);
  CHECK(b4.mismatches[0].col == 1);
  CHECK(b4.mismatches[0].displayed == 0.0);
  CHECK(b4.mismatches[0].first_principles == doctest::Approx(-qnn));
  CHECK(b4.max_abs_diff == doctest::Approx(qnn));
}

TEST_CASE("linearization requires a square model") {
  const GameConfig cfg = GameConfig::zeros(3, 2);
  CHECK_THROWS_WITH_AS(build_reduced_linearization(cfg), doctest::Contains("assumption 2"), AssumptionError);
  CHECK_THROWS_AS(compare_last_block(cfg), AssumptionError);
}
