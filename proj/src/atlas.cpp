#include "mjw/atlas.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "mjw/errors.hpp"

namespace mjw {

std::string to_string(ChartKind kind) { return kind == ChartKind::regular ? "regular" : "singular"; }

void AtlasSettings::validate() const {
  if (!(tube_width > 0.0)) throw ConfigError("atlas tube_width must be positive");
  if (bands < 1) throw ConfigError("atlas bands must be at least 1");
  if (!(band_overlap_cells > 0.0)) throw ConfigError("atlas band_overlap_cells must be positive");
  if (!(theta_sing > 0.0)) throw ConfigError("atlas theta_sing must be positive");
  if (!(theta_focal >= 0.0)) throw ConfigError("atlas theta_focal must be non-negative");
}

double smootherstep(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / s), b = std::exp(-1.0 / (1.0 - s));
  return a / (a + b);
}

namespace {

double segment_distance(double t, double p, double t0, double p0, double t1, double p1) {
  const double dt = t1 - t0, dp = p1 - p0;
  const double len2 = dt * dt + dp * dp;
  double s = len2 > 0.0 ? ((t - t0) * dt + (p - p0) * dp) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return std::hypot(t - (t0 + s * dt), p - (p0 + s * dp));
}

}  // namespace

Atlas::Atlas(std::shared_ptr<const LagrangianGrid> grid, CausticSet caustics, AtlasSettings settings)
    : grid_(std::move(grid)), interp_(grid_), caustics_(std::move(caustics)), settings_(settings) {
  settings_.validate();
  const auto& g = *grid_;
  theta_focal_ = settings_.theta_focal > 0.0 ? settings_.theta_focal : caustics_.theta_focal;
  const double lo = g.periodic() ? 0.0 : g.phis().front();
  const double hi = g.periodic() ? g.phi_period() : g.phis().back();
  for (int k = 0; k <= settings_.bands; ++k) band_edges_.push_back(lo + (hi - lo) * k / settings_.bands);
  band_delta_ = 0.5 * settings_.band_overlap_cells * g.dphi();
  if (settings_.bands > 1 && !(2.0 * band_delta_ < (hi - lo) / settings_.bands))
    throw ConfigError("atlas band overlap is wider than a band");

  // Tubes are narrowed locally so they stay clear of nodes where det(P, P_phi)
  // falls below half its smallest magnitude on the caustic or changes sign.
  const int n_lines = static_cast<int>(caustics_.polylines.size());
  const auto det_at = [&](int i, int j) { return det2(g.at(i, j).point.p, eikonal_variation(g, i, j).Pphi); };
  const double P = g.phi_period();
  for (int k = 0; k < n_lines; ++k) {
    const auto& line = caustics_.polylines[static_cast<size_t>(k)];
    double sign = 0.0, det_min = std::numeric_limits<double>::infinity();
    for (const auto& nd : line.nodes) {
      int j = 0;
      while (j + 1 < g.column_length(nd.column) && g.tau(j + 1) < nd.tau) ++j;
      for (int jj : {j, std::min(j + 1, g.column_length(nd.column) - 1)}) {
        const double d = det_at(nd.column, jj);
        const double sg = d > 0.0 ? 1.0 : -1.0;
        if (std::abs(d) <= settings_.theta_sing || (sign != 0.0 && sg != sign))
          throw AtlasFailure(fmt::format("det(P, P_phi) vanishes on caustic polyline {} near tau = {}, phi = {}", k,
                                         nd.tau, nd.phi));
        sign = sg;
        det_min = std::min(det_min, std::abs(d));
      }
    }

    Tube tube;
    const auto& nd = line.nodes;
    if (nd.size() == 1) tube.segments.push_back({nd[0].tau, nd[0].phi, nd[0].tau, nd[0].phi});
    for (size_t m = 1; m < nd.size(); ++m) tube.segments.push_back({nd[m - 1].tau, nd[m - 1].phi, nd[m].tau, nd[m].phi});
    if (line.closed && nd.size() > 1)
      tube.segments.push_back({nd.back().tau, nd.back().phi, nd.front().tau, nd.front().phi + P});

    std::vector<Vec2> bad;
    const double reach = settings_.tube_width / kTubeMargin;
    for (int i = 0; i < g.n_phi(); ++i)
      for (int j = 0; j < g.column_length(i); ++j) {
        const double d = det_at(i, j);
        if (std::abs(d) > std::max(settings_.theta_sing, kDetFloor * det_min) && (d > 0.0) == (sign > 0.0)) continue;
        if (distance_to(k, g.tau(j), g.phi(i)) <= reach) bad.push_back({g.tau(j), g.phi(i)});
      }
    const int kmax = g.periodic() ? 2 : 0;
    for (const auto& seg : tube.segments) {
      std::array<double, kTubeSamples + 1> w;
      for (int q = 0; q <= kTubeSamples; ++q) {
        const double s = static_cast<double>(q) / kTubeSamples;
        const Vec2 pt(seg[0] + s * (seg[2] - seg[0]), seg[1] + s * (seg[3] - seg[1]));
        double dmin = std::numeric_limits<double>::infinity();
        for (const auto& b : bad)
          for (int sh = -kmax; sh <= kmax; ++sh) dmin = std::min(dmin, (pt - b - Vec2(0.0, sh * P)).norm());
        w[static_cast<size_t>(q)] = std::min(settings_.tube_width, kTubeMargin * dmin);
      }
      tube.widths.push_back(w);
    }
    tubes_.push_back(std::move(tube));

    for (const auto& b : bad)
      if (raw_tube(k, b.x(), b.y()) > 0.0)
        throw AtlasFailure(fmt::format("tube {} cannot avoid the sign change of det(P, P_phi) at tau = {}, phi = {}", k,
                                       b.x(), b.y()));
  }
}

double Atlas::tube_width(int polyline) const {
  double w = 0.0;
  for (const auto& ws : tubes_[static_cast<size_t>(polyline)].widths)
    for (double v : ws) w = std::max(w, v);
  return w;
}

double Atlas::distance_to(int polyline, double tau, double phi) const {
  const auto& line = caustics_.polylines[static_cast<size_t>(polyline)];
  const auto& nd = line.nodes;
  const auto& g = *grid_;
  double best = std::numeric_limits<double>::infinity();
  const int kmax = g.periodic() ? 2 : 0;
  const double P = g.phi_period();
  for (int k = -kmax; k <= kmax; ++k) {
    const double p = phi + k * P;
    if (nd.size() == 1) best = std::min(best, std::hypot(tau - nd[0].tau, p - nd[0].phi));
    for (size_t m = 1; m < nd.size(); ++m)
      best = std::min(best, segment_distance(tau, p, nd[m - 1].tau, nd[m - 1].phi, nd[m].tau, nd[m].phi));
    if (line.closed && nd.size() > 1)
      best = std::min(best, segment_distance(tau, p, nd.back().tau, nd.back().phi, nd.front().tau, nd.front().phi + P));
  }
  return best;
}

std::pair<double, double> Atlas::tube_tau_range(int polyline, double phi) const {
  const auto& tube = tubes_[static_cast<size_t>(polyline)];
  const auto& g = *grid_;
  const int kmax = g.periodic() ? 2 : 0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (size_t m = 0; m < tube.segments.size(); ++m) {
    const auto& seg = tube.segments[m];
    const double w = *std::max_element(tube.widths[m].begin(), tube.widths[m].end());
    for (int k = -kmax; k <= kmax; ++k) {
      const double p = phi + k * g.phi_period();
      if (p < std::min(seg[1], seg[3]) - w || p > std::max(seg[1], seg[3]) + w) continue;
      lo = std::min(lo, std::min(seg[0], seg[2]) - w);
      hi = std::max(hi, std::max(seg[0], seg[2]) + w);
    }
  }
  return {lo, hi};
}

double Atlas::raw_tube(int polyline, double tau, double phi) const {
  const auto& tube = tubes_[static_cast<size_t>(polyline)];
  const auto& g = *grid_;
  const int kmax = g.periodic() ? 2 : 0;
  double best = 0.0;
  for (size_t m = 0; m < tube.segments.size(); ++m) {
    const auto& seg = tube.segments[m];
    const auto& ws = tube.widths[m];
    const double dt = seg[2] - seg[0], dp = seg[3] - seg[1];
    const double len2 = dt * dt + dp * dp;
    for (int k = -kmax; k <= kmax; ++k) {
      const double p = phi + k * g.phi_period();
      double s = len2 > 0.0 ? ((tau - seg[0]) * dt + (p - seg[1]) * dp) / len2 : 0.0;
      s = std::clamp(s, 0.0, 1.0);
      const double d = std::hypot(tau - (seg[0] + s * dt), p - (seg[1] + s * dp));
      const double u = s * kTubeSamples;
      const int q = std::min(static_cast<int>(u), kTubeSamples - 1);
      const double w = ws[static_cast<size_t>(q)] + (u - q) * (ws[static_cast<size_t>(q + 1)] - ws[static_cast<size_t>(q)]);
      if (d >= w) continue;
      best = std::max(best, 1.0 - smootherstep((d - 0.5 * w) / (0.5 * w)));
    }
  }
  return best;
}

double Atlas::singular_weight(int polyline, double tau, double phi) const {
  const double own = raw_tube(polyline, tau, phi);
  if (own == 0.0) return 0.0;
  double sum = 0.0, rest = 1.0;
  for (int k = 0; k < static_cast<int>(caustics_.polylines.size()); ++k) {
    const double r = k == polyline ? own : raw_tube(k, tau, phi);
    sum += r;
    rest *= 1.0 - r;
  }
  return own / (sum + rest);
}

double Atlas::total_singular_weight(double tau, double phi) const { return 1.0 - regular_weight(tau, phi); }

double Atlas::regular_weight(double tau, double phi) const {
  double sum = 0.0, rest = 1.0;
  for (int k = 0; k < static_cast<int>(caustics_.polylines.size()); ++k) {
    const double r = raw_tube(k, tau, phi);
    sum += r;
    rest *= 1.0 - r;
  }
  return rest / (sum + rest);
}

double Atlas::band_weight(int band, double phi) const {
  const int K = settings_.bands;
  if (K == 1) return 1.0;
  const auto& g = *grid_;
  const double a = band_edges_[static_cast<size_t>(band)];
  const double L = band_edges_[1] - band_edges_[0];
  double u = phi - a;
  if (g.periodic()) {
    const double P = g.phi_period();
    u -= P * std::floor((u + 0.5 * (P - L)) / P);  // u in [-(P - L) / 2, (P + L) / 2)
  }
  const double d = band_delta_;
  const bool first = !g.periodic() && band == 0;
  const bool last = !g.periodic() && band == K - 1;
  const double up = first ? 1.0 : smootherstep((u + d) / (2.0 * d));
  const double down = last ? 1.0 : 1.0 - smootherstep((u - L + d) / (2.0 * d));
  return up * down;
}

double Atlas::chart_weight(const Chart& chart, double tau, double phi, int morse) const {
  if (tau < tau_min_) return 0.0;
  if (chart.kind == ChartKind::singular) return singular_weight(chart.polyline, tau, phi);
  if (morse != chart.morse) return 0.0;
  return band_weight(chart.band, phi) * regular_weight(tau, phi);
}

double Atlas::partition_error() const {
  const auto& g = *grid_;
  double err = 0.0;
  for (int i = 0; i < g.n_phi(); ++i)
    for (int j = 0; j < g.column_length(i); ++j) {
      if (g.tau(j) < tau_min_) continue;
      double sum = 0.0;
      for (const auto& c : charts_) sum += chart_weight(c, g.tau(j), g.phi(i), g.morse(i, j));
      err = std::max(err, std::abs(sum - 1.0));
    }
  return err;
}

int singular_index_at(const LagrangianGrid& grid, int i, int j) {
  const auto& s = grid.at(i, j);
  const Variation ev = eikonal_variation(grid, i, j);
  const bool same = (s.J > 0.0) == (det2(s.point.p, ev.Pphi) > 0.0);
  return (s.morse + (same ? 0 : 1)) % 4;
}

std::vector<int> singular_indices(const Atlas& atlas, const Chart& chart) {
  if (chart.kind != ChartKind::singular) throw ChartDegenerate("singular_index needs a singular chart");
  const auto& g = atlas.grid();
  std::vector<int> out;
  for (int i = 0; i < g.n_phi(); ++i)
    for (int j = 0; j < g.column_length(i); ++j) {
      if (g.tau(j) < atlas.tau_min()) continue;
      if (atlas.singular_weight(chart.polyline, g.tau(j), g.phi(i)) <= 0.0) continue;
      if (eikonal_variation(g, i, j).Xphi.norm() <= atlas.theta_focal()) continue;
      out.push_back(singular_index_at(g, i, j));
    }
  if (out.empty())
    throw ChartDegenerate(fmt::format("singular chart {} contains no regular grid node", chart.id));
  return out;
}

int singular_index(const Atlas& atlas, const Chart& chart) { return singular_indices(atlas, chart).front(); }

Atlas build_atlas(std::shared_ptr<const LagrangianGrid> grid, const CausticSet& caustics,
                  const AtlasSettings& settings) {
  Atlas atlas(std::move(grid), caustics, settings);
  const auto& g = atlas.grid();

  // Leading rows where every column is focal form the source of a point-source curve.
  int j0 = 0;
  if (g.periodic()) {
    const auto focal_row = [&](int j) {
      for (int i = 0; i < g.n_phi(); ++i)
        if (g.valid(i, j) && eikonal_variation(g, i, j).Xphi.norm() > atlas.theta_focal_) return false;
      return true;
    };
    while (j0 < g.n_tau() && focal_row(j0)) ++j0;
    if (j0 == g.n_tau()) throw AtlasFailure("every grid row is focal");
  }
  atlas.tau_min_ = g.tau(j0);

  const double inf = std::numeric_limits<double>::infinity();
  std::map<std::pair<int, int>, Chart> regular;
  for (int i = 0; i < g.n_phi(); ++i)
    for (int j = j0; j < g.column_length(i); ++j) {
      const double tau = g.tau(j), phi = g.phi(i);
      const Variation ev = eikonal_variation(g, i, j);
      const double reg = atlas.regular_weight(tau, phi);
      if (reg < 1.0 && std::abs(det2(g.at(i, j).point.p, ev.Pphi)) <= atlas.settings_.theta_sing)
        throw AtlasFailure(fmt::format("det(P, P_phi) = {} vanishes inside a singular tube at tau = {}, phi = {}",
                                       det2(g.at(i, j).point.p, ev.Pphi), tau, phi));
      if (reg > 0.0 && ev.Xphi.norm() <= atlas.theta_focal_)
        throw AtlasFailure(fmt::format("|X_phi| = {} is focal outside every singular tube at tau = {}, phi = {}",
                                       ev.Xphi.norm(), tau, phi));
      if (reg <= 0.0) continue;
      for (int b = 0; b < atlas.settings_.bands; ++b) {
        if (atlas.band_weight(b, phi) <= 0.0) continue;
        auto [it, fresh] = regular.try_emplace({b, g.morse(i, j)});
        Chart& c = it->second;
        if (fresh) {
          c.kind = ChartKind::regular;
          c.band = b;
          c.morse = g.morse(i, j);
          c.maslov = c.morse % 4;
          c.tau_lo = c.phi_lo = inf;
          c.tau_hi = c.phi_hi = -inf;
        }
        c.tau_lo = std::min(c.tau_lo, tau);
        c.tau_hi = std::max(c.tau_hi, tau);
        c.phi_lo = std::min(c.phi_lo, phi);
        c.phi_hi = std::max(c.phi_hi, phi);
      }
    }
  for (auto& [key, c] : regular) {
    c.id = static_cast<int>(atlas.charts_.size());
    atlas.charts_.push_back(c);
  }

  for (int k = 0; k < static_cast<int>(caustics.polylines.size()); ++k) {
    Chart c;
    c.id = static_cast<int>(atlas.charts_.size());
    c.kind = ChartKind::singular;
    c.polyline = k;
    const double w = atlas.settings_.tube_width;
    c.tau_lo = c.phi_lo = inf;
    c.tau_hi = c.phi_hi = -inf;
    for (const auto& nd : caustics.polylines[static_cast<size_t>(k)].nodes) {
      c.tau_lo = std::min(c.tau_lo, nd.tau - w);
      c.tau_hi = std::max(c.tau_hi, nd.tau + w);
      c.phi_lo = std::min(c.phi_lo, nd.phi - w);
      c.phi_hi = std::max(c.phi_hi, nd.phi + w);
    }
    const auto idx = singular_indices(atlas, c);
    c.maslov = idx.front();
    c.index_consistent = std::all_of(idx.begin(), idx.end(), [&](int v) { return v == idx.front(); });
    if (!c.index_consistent)
      spdlog::warn("singular chart {} gets different indices from different regular nodes", c.id);
    atlas.charts_.push_back(c);
  }
  return atlas;
}

}  // namespace mjw
