#include "mfg/stability.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace mfg {

namespace {

void require_square_model(const GameConfig& cfg) {
  if (cfg.n != cfg.m)
    throw AssumptionError("assumption 2", "linearization needs n = m (got n=" + std::to_string(cfg.n) +
                                              ", m=" + std::to_string(cfg.m) + ")");
}

// Adds the Jacobian of one hierarchy flow (rate(x) * x_ij) from (i,j) to (target,j).
void add_flow_jacobian(Matrix& J, const Matrix& x, int n, int i, int j, int target, double base,
                       const RateTensor& evo, double delta_int) {
  const int m = static_cast<int>(x.cols());
  const int src = i + j * n;
  const int dst = target + j * n;
  double rate = base;
  for (int k = 0; k < m; ++k) rate += delta_int * evo(i, j, k) * x(i, k);
  auto add = [&](int col, double d) {
    J(src, col) -= d;
    J(dst, col) += d;
  };
  add(src, rate);
  if (delta_int != 0.0)
    for (int k = 0; k < m; ++k) add(i + k * n, delta_int * evo(i, j, k) * x(i, j));
}

}  // namespace

Matrix kinetic_jacobian(const Matrix& x_ref, const GameConfig& cfg) {
  require_shape(x_ref, cfg.n, cfg.m, "kinetic_jacobian");
  if (cfg.is_sink_variant()) throw std::invalid_argument("kinetic_jacobian: sink variant unsupported");
  const int n = cfg.n;
  const int N = cfg.n * cfg.m;
  Matrix J = Matrix::Zero(N, N);
  for (int j = 0; j < cfg.m; ++j)
    for (int i = 0; i < n; ++i) {
      if (i + 1 < n) add_flow_jacobian(J, x_ref, n, i, j, i + 1, cfg.q_up(i, j), cfg.q_up_evo, cfg.delta_int);
      if (i > 0) add_flow_jacobian(J, x_ref, n, i, j, i - 1, cfg.q_down(i, j), cfg.q_down_evo, cfg.delta_int);
    }
  return J;
}

Matrix build_reduced_linearization(const GameConfig& cfg, const Matrix& x_ref) {
  require_square_model(cfg);
  const Matrix J = kinetic_jacobian(x_ref, cfg);
  const int R = cfg.n * cfg.m - 1;
  // x_last = -(y_1 + ... + y_R) in perturbation coordinates.
  return J.topLeftCorner(R, R) - J.topRightCorner(R, 1) * Eigen::RowVectorXd::Ones(R);
}

Matrix build_reduced_linearization(const GameConfig& cfg) {
  return build_reduced_linearization(cfg, Matrix::Constant(cfg.n, cfg.m, 1.0 / (cfg.n * cfg.m)));
}

Matrix lift_reduced(const Vector& y, int n, int m) {
  if (y.size() != n * m - 1) throw std::invalid_argument("lift_reduced: size mismatch");
  Matrix x(n, m);
  Eigen::Map<Vector> flat(x.data(), n * m);
  flat.head(n * m - 1) = y;
  flat(n * m - 1) = -y.sum();
  return x;
}

std::vector<Vector> lifted_kernel_directions(int n, int m) {
  std::vector<Vector> out;
  for (int j = 0; j + 1 < m; ++j) {
    Matrix x = Matrix::Zero(n, m);
    x.col(j).setConstant(1.0 / n);
    x.col(m - 1).setConstant(-1.0 / n);
    out.push_back(Eigen::Map<const Vector>(x.data(), n * m).head(n * m - 1));
  }
  return out;
}

BlockComparison compare_last_block(const GameConfig& cfg) {
  require_square_model(cfg);
  const int n = cfg.n;
  const int c = cfg.m - 1;
  const int s = n - 1;
  BlockComparison out;
  out.displayed = Matrix::Zero(s, s);
  for (int r = 0; r < s; ++r) {
    out.displayed(r, r) = -cfg.q_up(r, c) - cfg.q_down(r, c);
    if (r > 0) out.displayed(r, r - 1) = cfg.q_up(r - 1, c);
    if (r + 1 < s) out.displayed(r, r + 1) = cfg.q_down(r + 1, c);
  }
  if (s >= 1) {
    const double qnn = cfg.q_down(n - 1, c);
    out.displayed(s - 1, s - 1) -= qnn;
    if (s >= 2) out.displayed(s - 1, s - 2) -= qnn;
  }

  GameConfig linear = cfg;
  linear.delta_int = 0.0;
  const Matrix L = build_reduced_linearization(linear);
  const int offset = (cfg.m - 1) * n;
  out.first_principles = L.block(offset, offset, s, s);

  const Matrix diff = out.displayed - out.first_principles;
  out.max_abs_diff = s > 0 ? diff.cwiseAbs().maxCoeff() : 0.0;
  for (int r = 0; r < s; ++r)
    for (int col = 0; col < s; ++col)
      if (std::abs(diff(r, col)) > 1e-12)
        out.mismatches.push_back({r + 1, col + 1, out.displayed(r, col), out.first_principles(r, col)});
  return out;
}

SpectrumReport spectrum(const Matrix& L) {
  if (L.rows() != L.cols()) throw std::invalid_argument("spectrum: matrix is not square");
  SpectrumReport report;
  if (L.rows() == 0) return report;

  Eigen::EigenSolver<Matrix> solver(L, false);
  if (solver.info() != Eigen::Success) throw NumericalError("spectrum: eigensolver did not converge");
  const Eigen::JacobiSVD<Matrix> svd(L);
  const Vector sv = svd.singularValues();

  report.norm = sv(0);
  report.tol_zero = 1e-8 * report.norm;
  const double tol = report.tol_zero;

  const auto& values = solver.eigenvalues();
  report.eigenvalues.assign(values.data(), values.data() + values.size());
  std::sort(report.eigenvalues.begin(), report.eigenvalues.end(),
            [](const auto& a, const auto& b) {
              return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
            });
  report.spectral_abscissa = report.eigenvalues.back().real();
  for (const auto& ev : report.eigenvalues) {
    if (std::abs(ev) < tol) {
      ++report.zero_count;
    } else if (ev.real() < -tol) {
      ++report.negative_count;
    } else if (ev.real() > tol) {
      ++report.positive_count;
    } else {
      ++report.imaginary_count;
    }
  }
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) < tol) ++report.geometric_multiplicity_zero;
  return report;
}

int numerical_rank(const Matrix& A, double rel_tol) {
  if (A.size() == 0) return 0;
  const Eigen::JacobiSVD<Matrix> svd(A);
  const Vector sv = svd.singularValues();
  const double cut = rel_tol * sv(0);
  return static_cast<int>((sv.array() > cut).count());
}

}  // namespace mfg
