#pragma once

// Initial curves phi -> (X0(phi), P0(phi)) on the energy shell. The manifold
// is the flow-out of such a curve.

#include <memory>
#include <string>
#include <vector>

#include "mjw/flows.hpp"

namespace mjw {

enum class CurveDomain { line, circle };

struct CurveNode {
  double phi;
  Vec2 x, p;
};

class InitialCurve {
 public:
  /// x = (phi, a), p = (0, k) for phi in [phi_min, phi_max].
  static InitialCurve scattering(const SymbolModel& model, double k, double a, double phi_min, double phi_max);
  /// x = a, p = b (cos phi, sin phi) on the circle R / 2 pi Z.
  static InitialCurve green(const SymbolModel& model, double b, const Vec2& a);
  /// Tabulated line curve interpolated with modified Akima splines; needs at
  /// least four nodes with increasing phi.
  static InitialCurve custom(const SymbolModel& model, std::vector<CurveNode> table);

  const std::string& kind() const { return kind_; }
  CurveDomain domain() const { return domain_; }
  double phi_min() const { return phi_min_; }
  double phi_max() const { return phi_max_; }

  PhasePoint point(double phi) const;
  /// (X0_phi, P0_phi).
  Variation variation(double phi) const;
  double s0(double phi) const;
  /// ds0/dphi = P0 . X0_phi.
  double s0_prime(double phi) const;

  // Parameters as given to the factory (for serialization).
  double k() const { return k_; }
  double a_line() const { return a_line_; }
  double b() const { return b_; }
  Vec2 a_point() const { return a_point_; }
  const std::vector<CurveNode>& table() const { return table_; }

 private:
  InitialCurve() = default;
  double wrap(double phi) const;

  std::string kind_;
  CurveDomain domain_ = CurveDomain::line;
  double phi_min_ = 0.0, phi_max_ = 0.0;
  double k_ = 0.0, a_line_ = 0.0, b_ = 0.0;
  Vec2 a_point_ = Vec2::Zero();
  std::vector<CurveNode> table_;

  struct Spline;
  std::shared_ptr<const Spline> spline_;
  std::vector<double> s0_nodes_;  // cumulative s0 at table nodes
};

/// s0 at the given phi values by cumulative quadrature of P0 . dX0, s0(phi_min) = 0.
std::vector<double> eikonal_s0(const InitialCurve& curve, const std::vector<double>& phis);

}  // namespace mjw
