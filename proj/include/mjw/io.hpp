#pragma once

// Text outputs: trajectory and manifold CSV, caustic and atlas JSON,
// wavefield CSV with an optional per-point breakdown, an SVG ray plot and a
// PGM heatmap of |psi|. Numbers are written with 17 significant digits so
// identical inputs give byte-identical files.

#include <json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "mjw/canop.hpp"

namespace mjw {

using json = nlohmann::ordered_json;

/// Columns phi,tau,t,x1,x2,p1,p2,Xphi1,Xphi2,Pphi1,Pphi2,s,J.
void write_trajectory_csv(std::ostream& os, const std::vector<std::pair<double, Trajectory>>& rays);
/// Trajectory columns plus morse,s_tilde for every valid grid node.
void write_manifold_csv(std::ostream& os, const LagrangianGrid& grid);

json caustics_json(const CausticSet& caustics);
json atlas_json(const Atlas& atlas);

/// Columns x1,x2,re,im,abs,leaf_count.
void write_wavefield_csv(std::ostream& os, const Wavefield& wf);
json wavefield_breakdown_json(const Wavefield& wf);

struct PlotStyle {
  int width = 800;
  /// Every n-th grid column is drawn as a characteristic.
  int ray_stride = 8;
  bool chart_boundaries = true;
};

/// x-space characteristics (blue), caustics (red) and chart boundaries (grey).
void write_manifold_svg(std::ostream& os, const Atlas& atlas, const PlotStyle& style = {});

/// Binary PGM of |psi| on an n1 x n2 grid, rows from top (largest x2),
/// scaled to the maximum. Caustic points inside the window are drawn black
/// when `overlay` is given.
void write_heatmap_pgm(std::ostream& os, const Wavefield& wf, int n1, int n2, const CausticSet* overlay = nullptr);

/// Writes `text` to `path`, replacing any existing file.
void write_file(const std::string& path, const std::string& text);

}  // namespace mjw
