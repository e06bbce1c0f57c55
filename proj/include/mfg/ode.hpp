#pragma once

#include <cmath>
#include <stdexcept>

#include "mfg/model.hpp"

namespace mfg::ode {

/// Uniform grid with an integer number of steps covering [t0, t1].
struct TimeGrid {
  double t0 = 0.0;
  double t1 = 0.0;
  int steps = 0;

  static TimeGrid cover(double t0, double t1, double dt) {
    if (!(t1 > t0)) throw std::invalid_argument("time grid: t1 must exceed t0");
    if (!(dt > 0.0) || dt > (t1 - t0) * (1.0 + 1e-12))
      throw std::invalid_argument("time grid: dt must be positive and at most t1 - t0");
    TimeGrid g{t0, t1, static_cast<int>(std::ceil((t1 - t0) / dt - 1e-9))};
    if (g.steps < 1) g.steps = 1;
    return g;
  }

  double step() const { return (t1 - t0) / steps; }
  double at(int k) const { return k == steps ? t1 : t0 + k * step(); }
};

/// One classical fourth-order Runge-Kutta step of y' = f(t, y).
template <class Rhs>
Matrix rk4_step(const Matrix& y, double t, double h, Rhs&& f) {
  const Matrix k1 = f(t, y);
  const Matrix k2 = f(t + 0.5 * h, y + (0.5 * h) * k1);
  const Matrix k3 = f(t + 0.5 * h, y + (0.5 * h) * k2);
  const Matrix k4 = f(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

}  // namespace mfg::ode
