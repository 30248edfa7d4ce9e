#pragma once

// Adaptive Gauss-Kronrod (7/15) quadrature for complex oscillatory integrands.

#include <complex>
#include <functional>

namespace mjw {

using Complex = std::complex<double>;

struct QuadSettings {
  double abs_tol = 1e-10;
  double rel_tol = 1e-7;
  int max_panels = 200000;

  void validate() const;
  bool operator==(const QuadSettings&) const = default;
};

struct QuadResult {
  Complex value;
  double error = 0.0;
  int panels = 0;
  long evaluations = 0;
};

/// Integrates f over [a, b] starting from `initial_panels` equal panels and
/// bisecting the panel with the largest error estimate until the total
/// estimate is below max(abs_tol, rel_tol |I|). Throws QuadratureNotConverged
/// when max_panels is exceeded.
QuadResult integrate_gk15(const std::function<Complex(double)>& f, double a, double b, int initial_panels,
                          const QuadSettings& settings = {});

}  // namespace mjw
