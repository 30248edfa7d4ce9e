#include "mjw/io.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>

#include "mjw/errors.hpp"

namespace mjw {

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

void write_sample(std::ostream& os, double phi, const TrajectorySample& s) {
  os << num(phi) << ',' << num(s.tau) << ',' << num(s.t) << ',' << num(s.point.x.x()) << ',' << num(s.point.x.y())
     << ',' << num(s.point.p.x()) << ',' << num(s.point.p.y()) << ',' << num(s.var.Xphi.x()) << ','
     << num(s.var.Xphi.y()) << ',' << num(s.var.Pphi.x()) << ',' << num(s.var.Pphi.y()) << ',' << num(s.s) << ','
     << num(s.J);
}

constexpr const char* kTrajectoryHeader = "phi,tau,t,x1,x2,p1,p2,Xphi1,Xphi2,Pphi1,Pphi2,s,J";

json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }

struct Frame {
  Vec2 lo, hi;
  double scale = 1.0;
  int width = 0, height = 0;
  double px(const Vec2& x) const { return 10.0 + (x.x() - lo.x()) * scale; }
  double py(const Vec2& x) const { return 10.0 + (hi.y() - x.y()) * scale; }
};

std::string polyline(const Frame& f, const std::vector<Vec2>& pts, const char* color, double width) {
  std::string d;
  for (const auto& p : pts) d += fmt::format("{}{:.2f},{:.2f}", d.empty() ? "" : " ", f.px(p), f.py(p));
  return fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" points=\"{}\"/>\n", color, width, d);
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const std::vector<std::pair<double, Trajectory>>& rays) {
  os << kTrajectoryHeader << '\n';
  for (const auto& [phi, tr] : rays)
    for (const auto& s : tr.samples) {
      write_sample(os, phi, s);
      os << '\n';
    }
}

void write_manifold_csv(std::ostream& os, const LagrangianGrid& grid) {
  os << kTrajectoryHeader << ",morse,s_tilde\n";
  for (int i = 0; i < grid.n_phi(); ++i)
    for (int j = 0; j < grid.column_length(i); ++j) {
      write_sample(os, grid.phi(i), grid.at(i, j));
      os << ',' << grid.morse(i, j) << ',' << num(grid.s_tilde(i, j)) << '\n';
    }
}

json caustics_json(const CausticSet& caustics) {
  json out;
  out["polylines"] = json::array();
  for (const auto& line : caustics.polylines) {
    json nodes = json::array();
    for (const auto& nd : line.nodes)
      nodes.push_back({{"tau", nd.tau}, {"phi", nd.phi}, {"x", vec(nd.x)}, {"multiplicity", nd.multiplicity}});
    out["polylines"].push_back({{"closed", line.closed}, {"nodes", nodes}});
  }
  json grazing = json::array();
  for (const auto& nd : caustics.grazing) grazing.push_back({{"tau", nd.tau}, {"phi", nd.phi}, {"x", vec(nd.x)}});
  out["grazing"] = grazing;
  out["theta_focal"] = caustics.theta_focal;
  return out;
}

json atlas_json(const Atlas& atlas) {
  const auto& s = atlas.settings();
  json out;
  out["settings"] = {{"tube_width", s.tube_width},
                     {"bands", s.bands},
                     {"band_overlap_cells", s.band_overlap_cells},
                     {"theta_sing", s.theta_sing},
                     {"theta_focal", atlas.theta_focal()}};
  out["tau_min"] = atlas.tau_min();
  out["partition_error"] = atlas.partition_error();
  json charts = json::array();
  for (const auto& c : atlas.charts()) {
    json j = {{"id", c.id},
              {"kind", to_string(c.kind)},
              {"tau", {c.tau_lo, c.tau_hi}},
              {"phi", {c.phi_lo, c.phi_hi}},
              {"maslov", c.maslov}};
    if (c.kind == ChartKind::regular) {
      j["morse"] = c.morse;
      j["band"] = c.band;
    } else {
      j["polyline"] = c.polyline;
      j["tube_width"] = atlas.tube_width(c.polyline);
      j["index_consistent"] = c.index_consistent;
    }
    charts.push_back(j);
  }
  out["charts"] = charts;
  return out;
}

void write_wavefield_csv(std::ostream& os, const Wavefield& wf) {
  os << "x1,x2,re,im,abs,leaf_count\n";
  for (const auto& p : wf.points)
    os << num(p.x.x()) << ',' << num(p.x.y()) << ',' << num(p.psi.real()) << ',' << num(p.psi.imag()) << ','
       << num(std::abs(p.psi)) << ',' << p.leaf_count << '\n';
}

json wavefield_breakdown_json(const Wavefield& wf) {
  json out;
  out["h"] = wf.h;
  out["form"] = to_string(wf.form);
  json pts = json::array();
  for (const auto& p : wf.points) {
    json contribs = json::array();
    for (const auto& c : p.contributions) {
      json roots = json::array();
      for (const auto& [tau, phi] : c.roots) roots.push_back({tau, phi});
      contribs.push_back({{"chart", c.chart},
                          {"kind", to_string(c.kind)},
                          {"re", c.value.real()},
                          {"im", c.value.imag()},
                          {"roots", roots}});
    }
    pts.push_back({{"x", vec(p.x)},
                   {"re", p.psi.real()},
                   {"im", p.psi.imag()},
                   {"leaf_count", p.leaf_count},
                   {"contributions", contribs}});
  }
  out["points"] = pts;
  return out;
}

void write_manifold_svg(std::ostream& os, const Atlas& atlas, const PlotStyle& style) {
  const auto& g = atlas.grid();
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (int i = 0; i < g.n_phi(); ++i)
    for (int j = 0; j < g.column_length(i); ++j) {
      lo = lo.cwiseMin(g.at(i, j).point.x);
      hi = hi.cwiseMax(g.at(i, j).point.x);
    }
  if (!(hi.x() > lo.x())) hi.x() = lo.x() + 1.0;
  if (!(hi.y() > lo.y())) hi.y() = lo.y() + 1.0;
  Frame f;
  f.lo = lo;
  f.hi = hi;
  f.scale = (style.width - 20) / (hi.x() - lo.x());
  f.width = style.width;
  f.height = static_cast<int>(std::ceil((hi.y() - lo.y()) * f.scale)) + 20;

  os << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n", f.width, f.height);
  os << fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", f.width, f.height);
  os << "<g id=\"characteristics\">\n";
  const int stride = std::max(1, style.ray_stride);
  for (int i = 0; i < g.n_phi(); i += stride) {
    std::vector<Vec2> pts;
    for (int j = 0; j < g.column_length(i); ++j) pts.push_back(g.at(i, j).point.x);
    if (pts.size() >= 2) os << polyline(f, pts, "#3060c0", 0.6);
  }
  os << "</g>\n";

  if (style.chart_boundaries) {
    // Chart rectangles traced through the interpolant; parts off the grid are skipped.
    os << "<g id=\"charts\">\n";
    const auto& interp = atlas.interp();
    for (const auto& c : atlas.charts()) {
      const double t0 = std::max(c.tau_lo, g.tau_start()), t1 = std::min(c.tau_hi, g.taus().back());
      double p0 = c.phi_lo, p1 = c.phi_hi;
      if (!g.periodic()) {
        p0 = std::max(p0, g.phis().front());
        p1 = std::min(p1, g.phis().back());
      }
      if (!(t1 > t0) || !(p1 > p0)) continue;
      constexpr int n = 64;
      const std::array<std::array<double, 4>, 4> sides = {{{t0, p0, t1, p0}, {t1, p0, t1, p1}, {t1, p1, t0, p1}, {t0, p1, t0, p0}}};
      for (const auto& s : sides) {
        std::vector<Vec2> pts;
        for (int k = 0; k <= n; ++k) {
          const double u = static_cast<double>(k) / n;
          ManifoldPoint mp;
          if (interp.eval(s[0] + u * (s[2] - s[0]), s[1] + u * (s[3] - s[1]), mp)) {
            pts.push_back(mp.X);
          } else {
            if (pts.size() >= 2) os << polyline(f, pts, "#909090", 0.8);
            pts.clear();
          }
        }
        if (pts.size() >= 2) os << polyline(f, pts, "#909090", 0.8);
      }
    }
    os << "</g>\n";
  }

  os << "<g id=\"caustics\">\n";
  for (const auto& line : atlas.caustics().polylines) {
    std::vector<Vec2> pts;
    for (const auto& nd : line.nodes) pts.push_back(nd.x);
    if (line.closed && !pts.empty()) pts.push_back(pts.front());
    if (pts.size() == 1) {
      os << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"#d02020\"/>\n", f.px(pts[0]), f.py(pts[0]));
    } else {
      os << polyline(f, pts, "#d02020", 2.0);
    }
  }
  os << "</g>\n</svg>\n";
}

void write_heatmap_pgm(std::ostream& os, const Wavefield& wf, int n1, int n2, const CausticSet* overlay) {
  if (static_cast<size_t>(n1) * static_cast<size_t>(n2) != wf.points.size())
    throw Error("heatmap size does not match the wavefield");
  double top = 0.0;
  for (const auto& p : wf.points) top = std::max(top, std::abs(p.psi));
  std::vector<unsigned char> pix(wf.points.size());
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) {
      const double a = std::abs(wf.points[static_cast<size_t>(j * n1 + i)].psi);
      const auto v = static_cast<unsigned char>(std::lround(top > 0.0 ? 255.0 * a / top : 0.0));
      pix[static_cast<size_t>((n2 - 1 - j) * n1 + i)] = v;
    }
  if (overlay && n1 > 1 && n2 > 1) {
    const Vec2 lo = wf.points.front().x, hi = wf.points.back().x;
    for (const auto& line : overlay->polylines)
      for (const auto& nd : line.nodes) {
        const double u = (nd.x.x() - lo.x()) / (hi.x() - lo.x()), v = (nd.x.y() - lo.y()) / (hi.y() - lo.y());
        if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) continue;
        const int i = static_cast<int>(std::lround(u * (n1 - 1))), j = static_cast<int>(std::lround(v * (n2 - 1)));
        pix[static_cast<size_t>((n2 - 1 - j) * n1 + i)] = 0;
      }
  }
  os << "P5\n" << n1 << ' ' << n2 << "\n255\n";
  os.write(reinterpret_cast<const char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path));
  out << text;
  if (!out) throw Error(fmt::format("write to '{}' failed", path));
}

}  // namespace mjw
