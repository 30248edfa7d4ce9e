#pragma once

// The Lagrangian manifold Lambda^2 sampled on a (tau, phi) grid, its caustic
// set and a bicubic Hermite interpolant of (X, P) over grid cells.

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "mjw/curve.hpp"

namespace mjw {

enum class Execution { serial, parallel };

struct GridSettings {
  int n_phi = 401;
  int n_tau = 400;
  double tau_max = 12.0;
  double tau_start_ratio = 1e-6;  // tau_start = ratio * tau_max

  void validate() const;
  bool operator==(const GridSettings&) const = default;
};

struct ColumnInfo {
  std::vector<CausticEvent> caustics;
  std::vector<CausticEvent> grazing;
  bool truncated = false;
  double end = 0.0;
  std::string exit_reason;
};

class LagrangianGrid {
 public:
  LagrangianGrid(SymbolModel model, InitialCurve curve, GridSettings grid, ODESettings ode);

  const SymbolModel& model() const { return model_; }
  const InitialCurve& curve() const { return curve_; }
  const GridSettings& settings() const { return grid_; }
  const ODESettings& ode() const { return ode_; }

  int n_phi() const { return grid_.n_phi; }
  int n_tau() const { return grid_.n_tau; }
  /// Number of cells along phi (one more than n_phi - 1 on the circle).
  int n_phi_cells() const { return periodic() ? n_phi() : n_phi() - 1; }
  bool periodic() const { return curve_.domain() == CurveDomain::circle; }
  double phi(int i) const { return phi_[static_cast<size_t>(i)]; }
  double tau(int j) const { return tau_[static_cast<size_t>(j)]; }
  const std::vector<double>& phis() const { return phi_; }
  const std::vector<double>& taus() const { return tau_; }
  double dphi() const { return dphi_; }
  double dtau() const { return dtau_; }
  double tau_start() const { return tau_.front(); }
  double phi_period() const { return 2.0 * kPi; }

  const TrajectorySample& at(int i, int j) const { return nodes_[index(i, j)]; }
  bool valid(int i, int j) const { return j < valid_len_[static_cast<size_t>(i)]; }
  int column_length(int i) const { return valid_len_[static_cast<size_t>(i)]; }
  const ColumnInfo& column(int i) const { return columns_[static_cast<size_t>(i)]; }
  int morse(int i, int j) const { return at(i, j).morse; }
  /// Eikonal coordinate s0(phi) + tau.
  double s_tilde(int i, int j) const { return s0_[static_cast<size_t>(i)] + tau(j); }
  double s0(int i) const { return s0_[static_cast<size_t>(i)]; }

  /// Column index after periodic wrap (identity on the line).
  int wrap(int i) const;

  /// Traces column i; used by build_manifold.
  void trace_column(int i);

 private:
  size_t index(int i, int j) const { return static_cast<size_t>(i) * static_cast<size_t>(n_tau()) + j; }

  SymbolModel model_;
  InitialCurve curve_;
  GridSettings grid_;
  ODESettings ode_;
  std::vector<double> phi_, tau_, s0_;
  double dphi_ = 0.0, dtau_ = 0.0;
  std::vector<TrajectorySample> nodes_;
  std::vector<int> valid_len_;
  std::vector<ColumnInfo> columns_;
};

LagrangianGrid build_manifold(const SymbolModel& model, const InitialCurve& curve, const GridSettings& grid,
                              const ODESettings& ode, Execution exec = Execution::parallel);

/// Number of zeros of J on (tau_start, tau_j] along column i.
int morse_index(const LagrangianGrid& grid, int i, int j);

/// phi-variations in eikonal coordinates: (X_phi, P_phi) - s0'(phi) (X_tau, P_tau).
Variation eikonal_variation(const LagrangianGrid& grid, int i, int j);

// --- Caustics -------------------------------------------------------------------

struct CausticNode {
  double tau = 0.0;
  double phi = 0.0;  // unwrapped along the polyline on the circle
  Vec2 x = Vec2::Zero();
  int column = 0;
  int multiplicity = 1;
};

struct CausticPolyline {
  std::vector<CausticNode> nodes;
  bool closed = false;
};

struct CausticSet {
  std::vector<CausticPolyline> polylines;
  std::vector<CausticNode> grazing;  // |J| dips without a sign change
  double theta_focal = 0.0;
};

/// Links per-column J zeros into polylines. Neighbouring-column zeros join
/// when their tau differ by less than link_tol.
CausticSet detect_caustics(const LagrangianGrid& grid, double link_tol = 0.0);

// --- Interpolant ----------------------------------------------------------------

/// Values and first derivatives of (X, P) at a (tau, phi) point.
struct ManifoldPoint {
  double tau = 0.0, phi = 0.0;
  Vec2 X, P, X_tau, X_phi, P_tau, P_phi;
  double s_tilde = 0.0;
  double t = 0.0;  // physical time, bilinear in the cell
  double J() const { return det2(X_tau, X_phi); }
};

/// Bicubic Hermite interpolation of (X, P) on grid cells using the nodal
/// tau-, phi- and mixed derivatives from the variational system.
class ManifoldInterpolant {
 public:
  explicit ManifoldInterpolant(std::shared_ptr<const LagrangianGrid> grid);
  const LagrangianGrid& grid() const { return *grid_; }

  /// Cell indices (i, j) containing (tau, phi); false outside the valid grid.
  bool locate(double tau, double phi, int& i, int& j) const;
  bool cell_valid(int i, int j) const;
  bool eval(double tau, double phi, ManifoldPoint& out) const;
  /// Evaluates inside a given cell with local coordinates u, v in [0, 1].
  ManifoldPoint eval_cell(int i, int j, double u, double v) const;
  /// Bounding box of X over the cell from the Bezier control net.
  void cell_bbox(int i, int j, Vec2& lo, Vec2& hi) const;
  /// phi of column i + 1 as seen from column i (adds the period on wrap).
  double phi_right(int i) const;
  /// Maps phi into the grid's range (periodic wrap on the circle).
  double normalize_phi(double phi) const;

  /// Valid cells whose control-net bounding box contains x.
  std::vector<std::pair<int, int>> candidate_cells(const Vec2& x) const;
  /// Diameter of the bounding box of X over all valid cells.
  double x_diameter() const { return (hi_ - lo_).norm(); }

 private:
  std::shared_ptr<const LagrangianGrid> grid_;
  struct CellBox {
    int i, j;
    Vec2 lo, hi;
  };
  std::vector<CellBox> boxes_;
  std::vector<std::vector<int>> bins_;
  int nbx_ = 0, nby_ = 0;
  Vec2 lo_ = Vec2::Zero(), hi_ = Vec2::Zero();
};

// --- Grid diagnostics -------------------------------------------------------------

struct GridInvariants {
  double abs_J = 0.0;   // max rel. error of |J| vs C |X_phi| (eikonal variations)
  double chain_rule = 0.0;    // max rel. error of J_phys / J vs R
  double eikonal = 0.0;       // max |s - s0 - tau|
  double shell = 0.0;         // max |C|P| - 1|
  bool morse_monotone = true;
  bool morse_matches_caustics = true;
  bool admissible = true;     // det(P, P_phi) bounded away from 0 where X_phi is small
};

GridInvariants grid_invariants(const LagrangianGrid& grid, const CausticSet& caustics, double theta_sing = 1e-6);

}  // namespace mjw
