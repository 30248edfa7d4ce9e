#pragma once

// Maslov canonical operator on the atlas: regular-chart WKB branches,
// singular-chart phi-integrals and their sum over the partition of unity.

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mjw/atlas.hpp"
#include "mjw/quadrature.hpp"

namespace mjw {

enum class FieldForm { general, factored, waterwave_specialized };

std::string to_string(FieldForm form);
FieldForm field_form_from_string(const std::string& name);

/// Amplitude A on the manifold; receives tau, physical time t and phi.
using Amplitude = std::function<Complex(double tau, double t, double phi)>;
Amplitude unit_amplitude();

struct FieldOptions {
  FieldForm form = FieldForm::general;
  bool include_singular = true;
  /// Refine regular roots on freshly integrated rays instead of the grid interpolant.
  bool polish = true;
  /// Oscillation resolution: initial quadrature panels cover at most this
  /// fraction of a local phase period.
  double panel_period_fraction = 0.5;
  QuadSettings quad;

  void validate() const;
};

/// One solution of X(tau, phi) = x.
struct RegularRoot {
  double tau = 0.0, phi = 0.0, t = 0.0;
  int morse = 0;
  Vec2 X, P, X_tau, X_phi, P_phi;  // eikonal variations
  double s_tilde = 0.0;
  double J = 0.0;
  double residual = 0.0;
};

/// All roots of X(tau, phi) = x over the valid grid cells, merged when
/// closer than 1e-8 in (tau, phi).
std::vector<RegularRoot> solve_regular_roots(const Atlas& atlas, const Vec2& x, bool polish = true);
/// Roots lying in the support of a regular chart.
std::vector<RegularRoot> solve_regular_roots(const Atlas& atlas, const Chart& chart, const Vec2& x,
                                             bool polish = true);

/// Regular-chart formula at one root, without the chart weight.
Complex regular_branch(const Atlas& atlas, const RegularRoot& root, double h, const Amplitude& A, FieldForm form);
Complex eval_regular(const Atlas& atlas, const Chart& chart, const Vec2& x, double h, const Amplitude& A,
                     FieldForm form, bool polish = true);

/// Root of <P(tau, phi), x - X(tau, phi)> = 0 near the chart's polyline.
std::optional<double> solve_singular_tau(const Atlas& atlas, const Chart& chart, const Vec2& x, double phi);

struct SingularResult {
  Complex value;
  QuadResult quad;
};

/// Singular-chart integral over the chart's phi-support. `weight` replaces
/// the chart's partition weight when given.
SingularResult eval_singular(const Atlas& atlas, const Chart& chart, const Vec2& x, double h, const Amplitude& A,
                             const FieldOptions& opts,
                             const std::function<double(double tau, double phi)>& weight = nullptr);

/// Singular-chart integral over [phi_lo, phi_hi] with an explicit weight and
/// index, tau found by Newton from `tau_seed`. Used to compare representations
/// away from caustics.
SingularResult eval_singular_local(const Atlas& atlas, const Vec2& x, double h, const Amplitude& A,
                                   const FieldOptions& opts, double phi_lo, double phi_hi, double tau_seed, int maslov,
                                   const std::function<double(double tau, double phi)>& weight);

struct Contribution {
  int chart = -1;
  ChartKind kind = ChartKind::regular;
  Complex value;
  std::vector<std::pair<double, double>> roots;  // (tau, phi)
};

struct FieldPoint {
  Vec2 x = Vec2::Zero();
  Complex psi;
  std::vector<Contribution> contributions;
  int leaf_count = 0;
  std::string error;  // non-empty if the evaluation failed
};

struct Wavefield {
  double h = 0.0;
  FieldForm form = FieldForm::general;
  std::vector<FieldPoint> points;
};

/// psi at one point as the sum over all charts.
FieldPoint eval_point(const Atlas& atlas, const Vec2& x, double h, const Amplitude& A, const FieldOptions& opts);

/// psi at every request point. Errors are collected per point and rethrown
/// together as QuadratureNotConverged or Error after all points ran.
Wavefield eval_field(const Atlas& atlas, const std::vector<Vec2>& points, double h, const Amplitude& A,
                     const FieldOptions& opts, Execution exec = Execution::parallel);

/// Sum of the regular branches at x with unit weights and no singular charts.
FieldPoint eval_regular_only(const Atlas& atlas, const Vec2& x, double h, const Amplitude& A, FieldForm form,
                             bool polish = true);

// --- Factored form ------------------------------------------------------------------

struct FactoredRow {
  Vec2 x;
  double h = 0.0;
  Complex inside;   // 1/sqrt(R(X)) inside the phi-integral
  Complex outside;  // 1/sqrt(R(x)) in front of it
  double discrepancy = 0.0;  // |inside - outside| / |outside|
};

struct FactoredReport {
  std::vector<FactoredRow> rows;
  /// max over points of |A / sqrt(dtau/dt) - A / sqrt(R(X))| / |A / sqrt(R(X))|.
  double transported_vs_divided = 0.0;
  /// Fitted exponent p in discrepancy ~ h^p, per point.
  std::vector<double> rates;
};

/// Compares the in-symbol and factored singular-chart representations at
/// regular points using a phi-bump of half-width `bump` around the root.
FactoredReport factored_form_check(const Atlas& atlas, const std::vector<Vec2>& points, const std::vector<double>& hs,
                                   const Amplitude& A, double bump = 0.3, const QuadSettings& quad = {});

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mjw
