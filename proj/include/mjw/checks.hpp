#pragma once

// Invariant suite run by `mjw check`: flow correspondence and conservation,
// manifold identities, atlas consistency and the factored-form convergence,
// each reported with its measured value and threshold.

#include <string>
#include <vector>

#include "mjw/config.hpp"
#include "mjw/io.hpp"

namespace mjw {

struct CheckResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckResult> results;
  bool all_pass() const;
  std::vector<std::string> failures() const;
  json to_json() const;
};

/// Launch parameters of `count` rays spread over the curve's phi-range.
std::vector<double> ray_phis(const InitialCurve& curve, int count);

/// Up to `count` regular points where the singular-chart phase is most
/// curved. The curvature is |<P_phi, X_phi>| in eikonal variations and must
/// reach `min_curvature`; det(P, P_phi) must keep its sign within `bump` in
/// phi. Points lie outside the tubes, away from grid edges and at least
/// `min_separation` apart.
std::vector<Vec2> factored_probe_points(const Atlas& atlas, int count, double bump = 0.3, double min_curvature = 10.0,
                                        double min_separation = 0.4);

CheckReport run_checks(const RunConfig& cfg, Execution exec = Execution::parallel);

}  // namespace mjw
