#pragma once

#include <complex>
#include <vector>

#include "mfg/model.hpp"

namespace mfg {

/// Analytic Jacobian of the kinetic equations (zero control) at x_ref, in the
/// column-major flattening kappa = i + j n.
Matrix kinetic_jacobian(const Matrix& x_ref, const GameConfig& cfg);

/// Linearization in the reduced coordinates y_kappa = x_kappa - x*_kappa,
/// kappa < nm - 1, with the last state (n, m) eliminated through the simplex
/// constraint. Requires n = m. At delta_int = 0 the result does not depend on x_ref.
Matrix build_reduced_linearization(const GameConfig& cfg, const Matrix& x_ref);

/// Same at the per-column uniform fixed point with equal column masses.
Matrix build_reduced_linearization(const GameConfig& cfg);

/// Maps a reduced vector back to a full n x m perturbation (sum zero).
Matrix lift_reduced(const Vector& y, int n, int m);

/// Reduced vectors of the per-column mass shifts (column j up by 1/n, column m
/// down by 1/n); these span the null space at delta_int = 0.
std::vector<Vector> lifted_kernel_directions(int n, int m);

/// Bottom-right block as it is commonly displayed (tridiagonal with the last
/// row shifted by -q-_nn only on its two nonzero entries), next to the block
/// obtained from the elimination itself.
struct BlockComparison {
  Matrix displayed;
  Matrix first_principles;
  double max_abs_diff = 0.0;
  struct Entry {
    int row = 0;  // 1-based
    int col = 0;
    double displayed = 0.0;
    double first_principles = 0.0;
  };
  std::vector<Entry> mismatches;
};

BlockComparison compare_last_block(const GameConfig& cfg);

struct SpectrumReport {
  std::vector<std::complex<double>> eigenvalues;  // sorted by real part
  double norm = 0.0;       // spectral norm of the matrix
  double tol_zero = 0.0;   // 1e-8 * norm
  int zero_count = 0;
  int negative_count = 0;
  int positive_count = 0;
  int imaginary_count = 0;  // |re| <= tol but |im| > tol; zero for a stable generator
  int geometric_multiplicity_zero = 0;
  double spectral_abscissa = 0.0;

  int dimension() const noexcept { return static_cast<int>(eigenvalues.size()); }
  bool balanced() const noexcept {
    return zero_count + negative_count + positive_count + imaginary_count == dimension();
  }
};

SpectrumReport spectrum(const Matrix& L);

/// Number of singular values above rel_tol times the largest one.
int numerical_rank(const Matrix& A, double rel_tol = 1e-10);

}  // namespace mfg
