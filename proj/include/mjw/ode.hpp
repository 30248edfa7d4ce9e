#pragma once

// Embedded Dormand-Prince 5(4) integrator with Shampine's continuous
// extension, driven through an observer that sees every accepted step.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "mjw/errors.hpp"

namespace mjw {

struct ODESettings {
  double rel_tol = 1e-11;
  double abs_tol = 1e-13;
  double max_step = 0.25;
  double initial_step = 0.0;  // 0 selects automatically
  long max_steps = 2'000'000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("ODE tolerances must be positive");
    if (!(max_step > 0.0)) throw ConfigError("ODE max_step must be positive");
  }
  bool operator==(const ODESettings&) const = default;
};

/// Dense output of one accepted step on [t0, t0 + h].
template <int Dim>
struct DenseStep {
  using State = Eigen::Matrix<double, Dim, 1>;
  double t0 = 0.0, h = 0.0;
  State r1, r2, r3, r4, r5;
  State f0, f1;  // derivatives at both ends

  double t1() const { return t0 + h; }

  State eval(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
  }

  State derivative(double t) const {
    // d/dt of the interpolant.
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    // y = r1 + s r2 + s s1 r3 + s^2 s1 r4 + s^2 s1^2 r5
    const State d = r2 + (1.0 - 2.0 * s) * r3 + (2.0 * s * s1 - s * s) * r4 +
                    (2.0 * s * s1 * s1 - 2.0 * s * s * s1) * r5;
    return d / h;
  }

  State start() const { return r1; }
  State end() const { return r1 + r2; }
};

/// Integrates y' = rhs(t, y) from t0 to t_end (> t0). `observer(step)` is
/// called for every accepted step and may return false to stop early.
/// Exceptions thrown by rhs propagate; steps accepted before remain observed.
template <int Dim, class Rhs, class Observer>
void integrate_dopri5(Rhs&& rhs, double t0, const Eigen::Matrix<double, Dim, 1>& y0, double t_end,
                      const ODESettings& cfg, Observer&& observer) {
  using State = Eigen::Matrix<double, Dim, 1>;
  cfg.validate();
  if (!(t_end > t0)) return;

  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                   a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;
  constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                   d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                   d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  State y = y0;
  State k1 = rhs(t0, y);
  double t = t0;

  const auto err_norm = [&](const State& err, const State& ya, const State& yb) {
    double acc = 0.0;
    for (int i = 0; i < Dim; ++i) {
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      acc += (err[i] / sc) * (err[i] / sc);
    }
    return std::sqrt(acc / Dim);
  };

  double h = cfg.initial_step;
  if (!(h > 0.0)) {
    // Hairer-Norsett-Wanner starting step heuristic.
    const double d0 = err_norm(y, y, y) * cfg.rel_tol;
    const double d1n = err_norm(k1, y, y) * cfg.rel_tol;
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, cfg.max_step);
    const State k2 = rhs(t + h0, State(y + h0 * k1));
    const double d2 = err_norm(State(k2 - k1), y, y) * cfg.rel_tol / h0;
    const double h1 = std::max(d1n, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                  : std::pow(0.01 / std::max(d1n, d2), 0.2);
    h = std::min({100.0 * h0, h1, cfg.max_step});
  }

  DenseStep<Dim> step;
  double err_prev = 1e-4;
  bool rejected_last = false;
  for (long n = 0; n < cfg.max_steps; ++n) {
    if (t >= t_end) return;
    bool last = false;
    if (t + h >= t_end || t + 1.01 * h >= t_end) {
      h = t_end - t;
      last = true;
    }
    const State k2 = rhs(t + c2 * h, State(y + h * (a21 * k1)));
    const State k3 = rhs(t + c3 * h, State(y + h * (a31 * k1 + a32 * k2)));
    const State k4 = rhs(t + c4 * h, State(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const State k5 = rhs(t + c5 * h, State(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const State k6 = rhs(t + h, State(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    const State y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const State k7 = rhs(t + h, y1);
    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = err_norm(err, y, y1);
    if (!std::isfinite(en)) {
      // Stage left the admissible set; approach the boundary with shorter steps.
      h *= 0.25;
      rejected_last = true;
      if (h < 1e-12 * std::max(1.0, std::abs(t)))
        throw NonFiniteRhs(fmt::format("right-hand side not finite near t = {}", t));
      continue;
    }

    if (en <= 1.0) {
      step.t0 = t;
      step.h = h;
      step.r1 = y;
      step.r2 = y1 - y;
      step.r3 = h * k1 - step.r2;
      step.r4 = step.r2 - h * k7 - step.r3;
      step.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      step.f0 = k1;
      step.f1 = k7;
      t = last ? t_end : t + h;
      y = y1;
      k1 = k7;
      if (!observer(static_cast<const DenseStep<Dim>&>(step))) return;
      if (last) return;
      // PI step-size control.
      double fac = 0.9 * std::pow(en, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, rejected_last ? 1.0 : 10.0);
      err_prev = std::max(en, 1e-4);
      h = std::min(h * fac, cfg.max_step);
      rejected_last = false;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      rejected_last = true;
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t)))
      throw IntegrationError(fmt::format("step size underflow at t = {}", t));
  }
  throw IntegrationError("maximum number of steps exceeded");
}

}  // namespace mjw
