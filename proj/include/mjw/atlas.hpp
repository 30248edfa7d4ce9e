#pragma once

// Chart atlas on the (tau, phi) grid: singular tubes around caustic
// polylines, regular charts per phi-band and Morse index, and a C^2
// partition of unity subordinate to them.

#include <array>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mjw/manifold.hpp"

namespace mjw {

enum class ChartKind { regular, singular };

std::string to_string(ChartKind kind);

struct AtlasSettings {
  /// Tube half-width in (tau, phi); weights are 1 within half of it. A tube
  /// is narrowed to stay clear of nodes where det(P, P_phi) changes sign.
  double tube_width = 0.5;
  /// Number of overlapping phi-bands for the regular charts.
  int bands = 1;
  /// Band overlap in grid cells of phi.
  double band_overlap_cells = 3.0;
  double theta_sing = 1e-6;
  /// Threshold on |X_phi|; zero selects 1e-3 * median |X_phi|.
  double theta_focal = 0.0;

  void validate() const;
  bool operator==(const AtlasSettings&) const = default;
};

struct Chart {
  int id = 0;
  ChartKind kind = ChartKind::regular;
  double tau_lo = 0.0, tau_hi = 0.0, phi_lo = 0.0, phi_hi = 0.0;
  int maslov = 0;     // m_j for regular charts, m_j^s for singular ones (mod 4)
  int morse = 0;      // Morse index of the leaf (regular charts)
  int band = -1;      // regular charts
  int polyline = -1;  // singular charts
  bool index_consistent = true;
};

/// C-infinity step: 0 for s <= 0, 1 for s >= 1, f(s) / (f(s) + f(1 - s)) with
/// f(s) = exp(-1 / s) between.
double smootherstep(double s);

class Atlas {
 public:
  Atlas(std::shared_ptr<const LagrangianGrid> grid, CausticSet caustics, AtlasSettings settings);

  const LagrangianGrid& grid() const { return *grid_; }
  std::shared_ptr<const LagrangianGrid> grid_ptr() const { return grid_; }
  const ManifoldInterpolant& interp() const { return interp_; }
  const CausticSet& caustics() const { return caustics_; }
  const AtlasSettings& settings() const { return settings_; }
  const std::vector<Chart>& charts() const { return charts_; }
  double theta_focal() const { return theta_focal_; }
  /// Points with tau below this belong to no chart (the source of a point-source curve).
  double tau_min() const { return tau_min_; }
  /// Range of tau covered by a tube at the given phi; empty when lo > hi.
  std::pair<double, double> tube_tau_range(int polyline, double phi) const;
  /// Largest local half-width of the tube around a polyline.
  double tube_width(int polyline) const;

  /// Distance in (tau, phi) to a caustic polyline, periodic in phi on the circle.
  double distance_to(int polyline, double tau, double phi) const;
  /// Weight of the tube around a polyline, normalized so tubes sum to at most one.
  double singular_weight(int polyline, double tau, double phi) const;
  double total_singular_weight(double tau, double phi) const;
  double band_weight(int band, double phi) const;
  /// Weight of a chart at (tau, phi) for a leaf with the given Morse index.
  double chart_weight(const Chart& chart, double tau, double phi, int morse) const;
  /// Weight of all regular charts at a point: 1 - total singular weight.
  double regular_weight(double tau, double phi) const;
  /// max |sum_j e_j - 1| over the covered grid nodes.
  double partition_error() const;

 private:
  friend Atlas build_atlas(std::shared_ptr<const LagrangianGrid>, const CausticSet&, const AtlasSettings&);
  double raw_tube(int polyline, double tau, double phi) const;

  std::shared_ptr<const LagrangianGrid> grid_;
  ManifoldInterpolant interp_;
  CausticSet caustics_;
  AtlasSettings settings_;
  std::vector<Chart> charts_;
  double theta_focal_ = 0.0;
  double tau_min_ = 0.0;
  static constexpr int kTubeSamples = 16;
  static constexpr double kTubeMargin = 0.85;
  static constexpr double kDetFloor = 0.5;
  struct Tube {
    std::vector<std::array<double, 4>> segments;  // (tau0, phi0, tau1, phi1)
    std::vector<std::array<double, kTubeSamples + 1>> widths;
  };
  std::vector<Tube> tubes_;
  std::vector<double> band_edges_;
  double band_delta_ = 0.0;
};

/// Builds and validates the atlas. Throws AtlasFailure when a node carrying
/// singular weight has det(P, P_phi) ~ 0 or a node carrying regular weight
/// has X_phi ~ 0.
Atlas build_atlas(std::shared_ptr<const LagrangianGrid> grid, const CausticSet& caustics,
                  const AtlasSettings& settings = {});

/// Singular index from one regular node: its Morse index if sign J equals
/// sign det(P, P_phi), the Morse index plus one otherwise (mod 4).
int singular_index_at(const LagrangianGrid& grid, int i, int j);

/// Singular index of a tube evaluated at every regular node it covers.
/// Throws ChartDegenerate if it covers none.
std::vector<int> singular_indices(const Atlas& atlas, const Chart& chart);
int singular_index(const Atlas& atlas, const Chart& chart);

}  // namespace mjw
