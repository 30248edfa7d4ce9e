#include "mjw/manifold.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "mjw/errors.hpp"

namespace mjw {

void GridSettings::validate() const {
  if (n_phi < 2 || n_tau < 2) throw ConfigError("grid needs at least two nodes in each direction");
  if (!(tau_max > 0.0) || !std::isfinite(tau_max)) throw ConfigError("grid tau_max must be positive");
  if (!(tau_start_ratio > 0.0 && tau_start_ratio < 1.0)) throw ConfigError("grid tau_start_ratio must lie in (0, 1)");
}

LagrangianGrid::LagrangianGrid(SymbolModel model, InitialCurve curve, GridSettings grid, ODESettings ode)
    : model_(std::move(model)), curve_(std::move(curve)), grid_(grid), ode_(ode) {
  grid_.validate();
  ode_.validate();
  const int np = grid_.n_phi, nt = grid_.n_tau;
  phi_.resize(static_cast<size_t>(np));
  if (periodic()) {
    dphi_ = 2.0 * kPi / np;
    for (int i = 0; i < np; ++i) phi_[static_cast<size_t>(i)] = i * dphi_;
  } else {
    dphi_ = (curve_.phi_max() - curve_.phi_min()) / (np - 1);
    for (int i = 0; i < np; ++i) phi_[static_cast<size_t>(i)] = curve_.phi_min() + i * dphi_;
    phi_.back() = curve_.phi_max();
  }
  const double t0 = grid_.tau_start_ratio * grid_.tau_max;
  tau_.resize(static_cast<size_t>(nt));
  dtau_ = (grid_.tau_max - t0) / (nt - 1);
  for (int j = 0; j < nt; ++j) tau_[static_cast<size_t>(j)] = t0 + j * dtau_;
  tau_.back() = grid_.tau_max;
  s0_ = eikonal_s0(curve_, phi_);
  nodes_.resize(static_cast<size_t>(np) * static_cast<size_t>(nt));
  valid_len_.assign(static_cast<size_t>(np), 0);
  columns_.resize(static_cast<size_t>(np));
}

int LagrangianGrid::wrap(int i) const {
  if (!periodic()) return i;
  const int n = n_phi();
  return ((i % n) + n) % n;
}

void LagrangianGrid::trace_column(int i) {
  const double f = phi(i);
  IntegrateOptions opts;
  opts.sample_at = tau_;
  opts.truncate_at_exit = true;
  opts.morse_start = tau_start();
  opts.s0 = s0(i);
  opts.grazing_abs = std::numeric_limits<double>::infinity();
  const Trajectory tr = integrate(model_, FlowKind::finsler, curve_.point(f), curve_.variation(f), grid_.tau_max,
                                  ode_, opts);
  const int len = static_cast<int>(std::min(tr.samples.size(), static_cast<size_t>(n_tau())));
  for (int j = 0; j < len; ++j) nodes_[index(i, j)] = tr.samples[static_cast<size_t>(j)];
  valid_len_[static_cast<size_t>(i)] = len;
  ColumnInfo& col = columns_[static_cast<size_t>(i)];
  col.caustics = tr.caustics;
  col.grazing = tr.grazing;
  col.truncated = tr.truncated;
  col.end = tr.end;
  col.exit_reason = tr.exit_reason;
  if (tr.truncated)
    spdlog::debug("column {} (phi = {}) truncated at tau = {}: {}", i, f, tr.end, tr.exit_reason);
}

LagrangianGrid build_manifold(const SymbolModel& model, const InitialCurve& curve, const GridSettings& grid,
                              const ODESettings& ode, Execution exec) {
  LagrangianGrid g(model, curve, grid, ode);
  const int n = g.n_phi();
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
  const auto column = [&](int i) {
    try {
      g.trace_column(i);
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) column(i);
  } else {
    for (int i = 0; i < n; ++i) column(i);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return g;
}

int morse_index(const LagrangianGrid& grid, int i, int j) {
  int m = 0;
  for (const auto& ev : grid.column(i).caustics)
    if (ev.tau <= grid.tau(j)) m += ev.multiplicity;
  return m;
}

Variation eikonal_variation(const LagrangianGrid& grid, int i, int j) {
  const TrajectorySample& s = grid.at(i, j);
  const double ds0 = grid.curve().s0_prime(grid.phi(i));
  return {s.var.Xphi - ds0 * s.velocity.dx, s.var.Pphi - ds0 * s.velocity.dp};
}

// --- Caustics -------------------------------------------------------------------

namespace {

double focal_threshold(const LagrangianGrid& grid) {
  std::vector<double> mags;
  for (int i = 0; i < grid.n_phi(); ++i)
    for (int j = 0; j < grid.column_length(i); ++j) mags.push_back(eikonal_variation(grid, i, j).Xphi.norm());
  if (mags.empty()) return 0.0;
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  return 1e-3 * *mid;
}

CausticNode make_node(const LagrangianGrid& grid, int i, const CausticEvent& ev) {
  return {ev.tau, grid.phi(i), ev.x, i, ev.multiplicity};
}

// Distance from a polyline end to a candidate tau, allowing for the
// polyline's current slope.
double link_distance(const CausticPolyline& line, double tau) {
  const auto& nd = line.nodes;
  const double raw = std::abs(nd.back().tau - tau);
  if (nd.size() < 2) return raw;
  const double predicted = 2.0 * nd.back().tau - nd[nd.size() - 2].tau;
  return std::min(raw, std::abs(predicted - tau));
}

}  // namespace

CausticSet detect_caustics(const LagrangianGrid& grid, double link_tol) {
  if (!(link_tol > 0.0)) link_tol = 0.1 * (grid.settings().tau_max - grid.tau_start());
  CausticSet set;
  set.theta_focal = focal_threshold(grid);

  const int n = grid.n_phi();
  std::vector<CausticPolyline> lines;
  std::vector<int> active;  // polylines whose last node sits in the previous column
  for (int i = 0; i < n; ++i) {
    const auto& evs = grid.column(i).caustics;
    struct Cand {
      double d;
      int line, ev;
    };
    std::vector<Cand> cands;
    for (int a : active)
      for (int e = 0; e < static_cast<int>(evs.size()); ++e) {
        const double d = link_distance(lines[static_cast<size_t>(a)], evs[static_cast<size_t>(e)].tau);
        if (d < link_tol) cands.push_back({d, a, e});
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return a.d < b.d || (a.d == b.d && (a.line < b.line || (a.line == b.line && a.ev < b.ev)));
    });
    std::vector<char> line_used(lines.size(), 0), ev_used(evs.size(), 0);
    std::vector<int> next_active;
    for (const auto& c : cands) {
      if (line_used[static_cast<size_t>(c.line)] || ev_used[static_cast<size_t>(c.ev)]) continue;
      line_used[static_cast<size_t>(c.line)] = 1;
      ev_used[static_cast<size_t>(c.ev)] = 1;
      lines[static_cast<size_t>(c.line)].nodes.push_back(make_node(grid, i, evs[static_cast<size_t>(c.ev)]));
      next_active.push_back(c.line);
    }
    for (int e = 0; e < static_cast<int>(evs.size()); ++e) {
      if (ev_used[static_cast<size_t>(e)]) continue;
      lines.push_back({{make_node(grid, i, evs[static_cast<size_t>(e)])}, false});
      next_active.push_back(static_cast<int>(lines.size()) - 1);
    }
    std::sort(next_active.begin(), next_active.end());
    active = std::move(next_active);
  }

  // Second pass: join pieces whose link is only visible when extrapolating
  // the later piece backwards.
  {
    struct Cand {
      double d;
      size_t a, b;
    };
    std::vector<Cand> cands;
    for (size_t a = 0; a < lines.size(); ++a)
      for (size_t b = 0; b < lines.size(); ++b) {
        if (lines[a].nodes.back().column + 1 != lines[b].nodes.front().column) continue;
        const auto& nb = lines[b].nodes;
        double d = link_distance(lines[a], nb.front().tau);
        if (nb.size() >= 2) d = std::min(d, std::abs(2.0 * nb[0].tau - nb[1].tau - lines[a].nodes.back().tau));
        if (d < link_tol) cands.push_back({d, a, b});
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
      return x.d < y.d || (x.d == y.d && (x.a < y.a || (x.a == y.a && x.b < y.b)));
    });
    std::vector<int> next(lines.size(), -1);
    std::vector<char> has_prev(lines.size(), 0);
    for (const auto& c : cands) {
      if (next[c.a] >= 0 || has_prev[c.b]) continue;
      next[c.a] = static_cast<int>(c.b);
      has_prev[c.b] = 1;
    }
    std::vector<CausticPolyline> joined;
    std::vector<int> remap(lines.size(), -1);
    for (size_t a = 0; a < lines.size(); ++a) {
      if (has_prev[a]) continue;
      CausticPolyline pl;
      for (int k = static_cast<int>(a); k >= 0; k = next[static_cast<size_t>(k)]) {
        remap[static_cast<size_t>(k)] = static_cast<int>(joined.size());
        pl.nodes.insert(pl.nodes.end(), lines[static_cast<size_t>(k)].nodes.begin(),
                        lines[static_cast<size_t>(k)].nodes.end());
      }
      joined.push_back(std::move(pl));
    }
    std::vector<int> still_active;
    for (int a : active)
      if (next[static_cast<size_t>(a)] < 0) still_active.push_back(remap[static_cast<size_t>(a)]);
    std::sort(still_active.begin(), still_active.end());
    lines = std::move(joined);
    active = std::move(still_active);
  }

  if (grid.periodic() && !lines.empty()) {
    // Join polylines across the seam between the last and the first column.
    std::vector<char> dead(lines.size(), 0);
    for (int a : active) {
      if (dead[static_cast<size_t>(a)]) continue;
      auto& la = lines[static_cast<size_t>(a)];
      int best = -1;
      double best_d = link_tol;
      for (size_t b = 0; b < lines.size(); ++b) {
        if (dead[b] || lines[b].closed || lines[b].nodes.front().column != 0) continue;
        const double d = std::abs(la.nodes.back().tau - lines[b].nodes.front().tau);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(b);
        }
      }
      if (best < 0) continue;
      if (best == a) {
        la.closed = true;
        continue;
      }
      auto& lb = lines[static_cast<size_t>(best)];
      const double shift = la.nodes.back().phi + grid.dphi() - lb.nodes.front().phi;
      for (auto nd : lb.nodes) {
        nd.phi += shift;
        la.nodes.push_back(nd);
      }
      dead[static_cast<size_t>(best)] = 1;
    }
    std::vector<CausticPolyline> kept;
    for (size_t k = 0; k < lines.size(); ++k)
      if (!dead[k]) kept.push_back(std::move(lines[k]));
    lines = std::move(kept);
  }
  set.polylines = std::move(lines);

  for (int i = 0; i < n; ++i)
    for (const auto& ev : grid.column(i).grazing) {
      const double C = grid.model().dispersion_C(ev.x);
      if (ev.J_min / C >= set.theta_focal) continue;
      set.grazing.push_back(make_node(grid, i, ev));
      spdlog::warn("near-tangential zero of J without sign change at tau = {}, phi = {} (|J| = {})", ev.tau,
                   grid.phi(i), ev.J_min);
    }
  return set;
}

// --- Interpolant ----------------------------------------------------------------

namespace {

struct Hermite {
  double h0, h1, g0, g1;     // values: h0/h1 weight the endpoint values, g0/g1 the slopes
  double dh0, dh1, dg0, dg1;  // derivatives in the local coordinate
};

Hermite hermite(double u) {
  const double u2 = u * u, u3 = u2 * u;
  return {2 * u3 - 3 * u2 + 1, -2 * u3 + 3 * u2, u3 - 2 * u2 + u, u3 - u2,
          6 * u2 - 6 * u,      -6 * u2 + 6 * u,  3 * u2 - 4 * u + 1, 3 * u2 - 2 * u};
}

using Vec4 = Eigen::Vector4d;

struct Corner {
  Vec4 f, ft, fp, ftp;  // (X, P) and its tau-, phi- and mixed derivatives
};

Corner corner(const TrajectorySample& s) {
  Corner c;
  c.f << s.point.x, s.point.p;
  c.ft << s.velocity.dx, s.velocity.dp;
  c.fp << s.var.Xphi, s.var.Pphi;
  c.ftp << s.var_velocity.Xphi, s.var_velocity.Pphi;
  return c;
}

}  // namespace

ManifoldInterpolant::ManifoldInterpolant(std::shared_ptr<const LagrangianGrid> grid) : grid_(std::move(grid)) {
  const auto& g = *grid_;
  const double inf = std::numeric_limits<double>::infinity();
  lo_ = Vec2::Constant(inf);
  hi_ = Vec2::Constant(-inf);
  for (int i = 0; i < g.n_phi_cells(); ++i)
    for (int j = 0; j + 1 < g.n_tau(); ++j) {
      if (!cell_valid(i, j)) continue;
      CellBox b{i, j, {}, {}};
      cell_bbox(i, j, b.lo, b.hi);
      if (!b.lo.allFinite() || !b.hi.allFinite()) continue;
      lo_ = lo_.cwiseMin(b.lo);
      hi_ = hi_.cwiseMax(b.hi);
      boxes_.push_back(b);
    }
  if (boxes_.empty()) {
    lo_ = hi_ = Vec2::Zero();
    return;
  }
  const int n = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(boxes_.size())) / 2));
  nbx_ = nby_ = n;
  bins_.assign(static_cast<size_t>(n * n), {});
  const Vec2 ext = (hi_ - lo_).cwiseMax(1e-300);
  const auto bin = [&](double v, double lo, double e) { return std::clamp(static_cast<int>((v - lo) / e * n), 0, n - 1); };
  for (int k = 0; k < static_cast<int>(boxes_.size()); ++k) {
    const auto& b = boxes_[static_cast<size_t>(k)];
    const int x0 = bin(b.lo.x(), lo_.x(), ext.x()), x1 = bin(b.hi.x(), lo_.x(), ext.x());
    const int y0 = bin(b.lo.y(), lo_.y(), ext.y()), y1 = bin(b.hi.y(), lo_.y(), ext.y());
    for (int bx = x0; bx <= x1; ++bx)
      for (int by = y0; by <= y1; ++by) bins_[static_cast<size_t>(bx * n + by)].push_back(k);
  }
}

std::vector<std::pair<int, int>> ManifoldInterpolant::candidate_cells(const Vec2& x) const {
  std::vector<std::pair<int, int>> out;
  if (boxes_.empty() || (x.array() < lo_.array()).any() || (x.array() > hi_.array()).any()) return out;
  const Vec2 ext = (hi_ - lo_).cwiseMax(1e-300);
  const int bx = std::clamp(static_cast<int>((x.x() - lo_.x()) / ext.x() * nbx_), 0, nbx_ - 1);
  const int by = std::clamp(static_cast<int>((x.y() - lo_.y()) / ext.y() * nby_), 0, nby_ - 1);
  const double pad = 1e-9 * x_diameter();
  for (int k : bins_[static_cast<size_t>(bx * nby_ + by)]) {
    const auto& b = boxes_[static_cast<size_t>(k)];
    if ((x.array() >= b.lo.array() - pad).all() && (x.array() <= b.hi.array() + pad).all()) out.push_back({b.i, b.j});
  }
  return out;
}

double ManifoldInterpolant::phi_right(int i) const {
  const auto& g = *grid_;
  if (g.periodic() && i == g.n_phi() - 1) return g.phi(i) + g.dphi();
  return g.phi(i + 1);
}

double ManifoldInterpolant::normalize_phi(double phi) const {
  const auto& g = *grid_;
  if (!g.periodic()) return phi;
  const double P = g.phi_period();
  return phi - P * std::floor(phi / P);
}

bool ManifoldInterpolant::cell_valid(int i, int j) const {
  const auto& g = *grid_;
  if (i < 0 || i >= g.n_phi_cells() || j < 0 || j >= g.n_tau() - 1) return false;
  return g.valid(i, j + 1) && g.valid(g.wrap(i + 1), j + 1);
}

bool ManifoldInterpolant::locate(double tau, double phi, int& i, int& j) const {
  const auto& g = *grid_;
  phi = normalize_phi(phi);
  if (tau < g.tau_start() || tau > g.taus().back()) return false;
  j = std::min(static_cast<int>((tau - g.tau_start()) / g.dtau()), g.n_tau() - 2);
  if (g.periodic()) {
    i = std::min(static_cast<int>(phi / g.dphi()), g.n_phi() - 1);
  } else {
    if (phi < g.phis().front() || phi > g.phis().back()) return false;
    i = std::min(static_cast<int>((phi - g.phis().front()) / g.dphi()), g.n_phi() - 2);
  }
  return cell_valid(i, j);
}

ManifoldPoint ManifoldInterpolant::eval_cell(int i, int j, double u, double v) const {
  const auto& g = *grid_;
  const int i1 = g.wrap(i + 1);
  const double dt = g.tau(j + 1) - g.tau(j);
  const double dp = phi_right(i) - g.phi(i);
  const Corner c00 = corner(g.at(i, j)), c10 = corner(g.at(i, j + 1));
  const Corner c01 = corner(g.at(i1, j)), c11 = corner(g.at(i1, j + 1));
  const Hermite a = hermite(u), b = hermite(v);

  // Corner (p, q): p indexes tau (0 at j), q indexes phi (0 at i).
  const auto blend = [&](double ha0, double ha1, double ga0, double ga1, double hb0, double hb1, double gb0,
                         double gb1) {
    const Corner* cs[2][2] = {{&c00, &c01}, {&c10, &c11}};
    const double ha[2] = {ha0, ha1}, ga[2] = {ga0, ga1}, hb[2] = {hb0, hb1}, gb[2] = {gb0, gb1};
    Vec4 out = Vec4::Zero();
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) {
        const Corner& c = *cs[p][q];
        out += ha[p] * hb[q] * c.f + ga[p] * dt * hb[q] * c.ft + ha[p] * gb[q] * dp * c.fp +
               ga[p] * dt * gb[q] * dp * c.ftp;
      }
    return out;
  };
  const Vec4 f = blend(a.h0, a.h1, a.g0, a.g1, b.h0, b.h1, b.g0, b.g1);
  const Vec4 ft = blend(a.dh0, a.dh1, a.dg0, a.dg1, b.h0, b.h1, b.g0, b.g1) / dt;
  const Vec4 fp = blend(a.h0, a.h1, a.g0, a.g1, b.dh0, b.dh1, b.dg0, b.dg1) / dp;

  ManifoldPoint mp;
  mp.tau = g.tau(j) + u * dt;
  mp.phi = g.phi(i) + v * dp;
  mp.X = f.head<2>();
  mp.P = f.tail<2>();
  mp.X_tau = ft.head<2>();
  mp.P_tau = ft.tail<2>();
  mp.X_phi = fp.head<2>();
  mp.P_phi = fp.tail<2>();
  // s0 is interpolated linearly; it vanishes for the built-in curves.
  mp.s_tilde = (1.0 - v) * g.s0(i) + v * g.s0(i1) + mp.tau;
  if (g.curve().kind() == "custom") mp.s_tilde = g.curve().s0(mp.phi) + mp.tau;
  mp.t = (1.0 - u) * ((1.0 - v) * g.at(i, j).t + v * g.at(i1, j).t) +
         u * ((1.0 - v) * g.at(i, j + 1).t + v * g.at(i1, j + 1).t);
  return mp;
}

bool ManifoldInterpolant::eval(double tau, double phi, ManifoldPoint& out) const {
  int i = 0, j = 0;
  if (!locate(tau, phi, i, j)) return false;
  const auto& g = *grid_;
  const double pn = normalize_phi(phi);
  const double u = std::clamp((tau - g.tau(j)) / (g.tau(j + 1) - g.tau(j)), 0.0, 1.0);
  const double v = std::clamp((pn - g.phi(i)) / (phi_right(i) - g.phi(i)), 0.0, 1.0);
  out = eval_cell(i, j, u, v);
  out.phi = phi;
  return true;
}

void ManifoldInterpolant::cell_bbox(int i, int j, Vec2& lo, Vec2& hi) const {
  const auto& g = *grid_;
  const int i1 = g.wrap(i + 1);
  const double dt = g.tau(j + 1) - g.tau(j);
  const double dp = phi_right(i) - g.phi(i);
  lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  const auto add = [&](const Vec2& v) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  };
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q) {
      const TrajectorySample& s = g.at(q == 0 ? i : i1, j + p);
      const double su = p == 0 ? 1.0 : -1.0, sv = q == 0 ? 1.0 : -1.0;
      const Vec2 fu = s.velocity.dx * dt / 3.0, fv = s.var.Xphi * dp / 3.0;
      const Vec2 fuv = s.var_velocity.Xphi * dt * dp / 9.0;
      add(s.point.x);
      add(s.point.x + su * fu);
      add(s.point.x + sv * fv);
      add(s.point.x + su * fu + sv * fv + su * sv * fuv);
    }
}

// --- Grid diagnostics -------------------------------------------------------------

GridInvariants grid_invariants(const LagrangianGrid& grid, const CausticSet& caustics, double theta_sing) {
  GridInvariants inv;
  const auto& model = grid.model();
  std::vector<std::vector<std::pair<double, int>>> per_column(static_cast<size_t>(grid.n_phi()));
  for (const auto& line : caustics.polylines)
    for (const auto& nd : line.nodes) per_column[static_cast<size_t>(nd.column)].push_back({nd.tau, nd.multiplicity});
  for (int i = 0; i < grid.n_phi(); ++i) {
    int prev = 0;
    for (int j = 0; j < grid.column_length(i); ++j) {
      const TrajectorySample& s = grid.at(i, j);
      const Variation ev = eikonal_variation(grid, i, j);
      const double C = model.dispersion_C(s.point.x);
      const double cx = C * ev.Xphi.norm();
      if (cx > 1e-12) inv.abs_J = std::max(inv.abs_J, std::abs(std::abs(s.J) - cx) / cx);
      if (std::abs(s.J) > 1e-12) {
        const Vec2 Xt = rhs_physical(model, s.point).dx;
        const double R = model.factor_R(s.point.x);
        inv.chain_rule = std::max(inv.chain_rule, std::abs(det2(Xt, s.var.Xphi) / s.J - R) / std::abs(R));
      }
      inv.eikonal = std::max(inv.eikonal, std::abs(s.s - grid.s_tilde(i, j)));
      inv.shell = std::max(inv.shell, model.shell_residual(s.point.x, s.point.p));
      if (s.morse < prev) inv.morse_monotone = false;
      prev = s.morse;
      int crossings = 0;
      for (const auto& [tau, mult] : per_column[static_cast<size_t>(i)])
        if (tau <= grid.tau(j)) crossings += mult;
      if (crossings != s.morse) inv.morse_matches_caustics = false;
      if (ev.Xphi.norm() < caustics.theta_focal && std::abs(det2(s.point.p, ev.Pphi)) <= theta_sing)
        inv.admissible = false;
    }
  }
  return inv;
}

}  // namespace mjw
