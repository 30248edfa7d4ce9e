// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion holds.
//
// usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <functional>
#include <memory>
#include <omp.h>
#include <spdlog/spdlog.h>
#include <sstream>
#include <string>
#include <vector>

#include "mjw/checks.hpp"
#include "mjw/config.hpp"
#include "mjw/errors.hpp"
#include "mjw/io.hpp"

using namespace mjw;

namespace {

struct Outcome {
  bool pass;
  std::string summary;
};

struct Bump {
  RunConfig cfg = preset("fig1");
  SymbolModel model = make_model(cfg);
  InitialCurve curve = make_curve(cfg, model);
  std::shared_ptr<const LagrangianGrid> grid =
      std::make_shared<const LagrangianGrid>(build_manifold(model, curve, cfg.grid, cfg.ode));
  Atlas atlas = build_atlas(grid, detect_caustics(*grid), cfg.atlas);
};

const Bump& bump() {
  static const Bump b;
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ScalarField2D gaussian_depth() { return ScalarField2D::parse("sum(1, gaussian(1, 2, 1, 1.2, -0.4))"); }

PhasePoint on_shell(const SymbolModel& m, const Vec2& x, double angle) {
  return {x, Vec2(std::cos(angle), std::sin(angle)) / m.dispersion_C(x)};
}

// 1. Flow correspondence on 20 rays of the bump scene.
Outcome correspondence() {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = preset("fig1");
  cfg.ode.rel_tol = 1e-10;
  const auto model = make_model(cfg);
  const auto curve = make_curve(cfg, model);
  double worst = 0.0;
  for (double phi : ray_phis(curve, 20))
    worst = std::max(worst, verify_correspondence(model, curve.point(phi), curve.variation(phi), 12.0, cfg.ode));
  const double t = seconds_since(t0);
  return {worst <= 1e-6 && t < 30.0, fmt::format("max deviation {:.2e} (<= 1e-6), {:.2f} s (< 30 s)", worst, t)};
}

// 2. Manifold identities on the bump grid.
Outcome identities() {
  const auto& b = bump();
  const auto inv = grid_invariants(*b.grid, b.atlas.caustics(), b.cfg.atlas.theta_sing);
  const bool ok = inv.abs_J <= 1e-6 && inv.eikonal <= 1e-8 && inv.chain_rule <= 1e-6;
  return {ok, fmt::format("|J| vs C|X_phi| {:.2e}, eikonal {:.2e}, J_phys/J vs R {:.2e}", inv.abs_J, inv.eikonal,
                          inv.chain_rule)};
}

// 3. Hamiltonian drift per unit time on every model.
Outcome conservation() {
  const auto D = gaussian_depth();
  const auto g = ScalarField2D::gaussian({1, 1}, {1, 1}, 0.3);
  const std::vector<SymbolModel> models{
      SymbolModel::schrodinger(2.0, ScalarField2D::gaussian({1, 1}, {1, 1}, 0.5)),
      SymbolModel::helmholtz(2.0, ScalarField2D::parse(preset("fig1").model.U)),
      SymbolModel::graphene(2.0, g, ScalarField2D::constant(0.5), 1),
      SymbolModel::graphene(-2.0, g, ScalarField2D::constant(0.5), -1),
      SymbolModel::waterwave(1.2, D),
      SymbolModel::waterwave_tension(1.2, D, ScalarField2D::constant(0.5)),
  };
  ODESettings ode;
  double worst = 0.0;
  std::string which;
  for (const auto& m : models) {
    const PhasePoint q = on_shell(m, {0.0, 0.2}, 0.9);
    for (FlowKind k : {FlowKind::physical, FlowKind::finsler}) {
      const auto tr = integrate(m, k, q, {}, 4.0, ode);
      const auto H = [&](const TrajectorySample& s) {
        return k == FlowKind::physical ? m.physical_hamiltonian(s.point.x, s.point.p).v
                                       : m.finsler_hamiltonian(s.point.x, s.point.p).v;
      };
      const double h0 = H(tr.samples.front());
      double drift = 0.0;
      for (const auto& s : tr.samples) drift = std::max(drift, std::abs(H(s) - h0));
      const auto& last = tr.samples.back();
      drift /= std::max(1.0, k == FlowKind::physical ? last.t : last.tau);
      if (drift >= worst) {
        worst = drift;
        which = fmt::format("{} {}", to_string(m.kind()), to_string(k));
      }
    }
  }
  return {worst <= 1e-8, fmt::format("max drift {:.2e} per unit time over 6 models (worst {})", worst, which)};
}

// 4. Reduced water-wave systems, Y residuals and dY.
Outcome reduced() {
  const auto D = gaussian_depth();
  const auto ww = SymbolModel::waterwave(1.2, D);
  const auto wt = SymbolModel::waterwave_tension(1.2, D, ScalarField2D::constant(0.5));
  ODESettings ode;
  ode.rel_tol = 1e-11;
  double flow = 0.0;
  for (double angle : {0.3, 0.9, 2.0}) {
    flow = std::max(flow, compare_tau_flows(ww, FlowKind::reduced, FlowKind::finsler, on_shell(ww, {0.0, 0.5}, angle),
                                            {}, 5.0, ode));
    flow = std::max(flow, compare_tau_flows(wt, FlowKind::reduced, FlowKind::finsler, on_shell(wt, {0.0, 0.5}, angle),
                                            {}, 5.0, ode));
  }
  double resid = 0.0, deriv = 0.0;
  for (double e : {0.05, 0.3, 1.0, 2.5, 7.0, 20.0}) {
    const double y = solve_Y(e);
    resid = std::max(resid, std::abs(y * std::tanh(y) - e * e) / std::max(1.0, e * e));
    for (double nu : {0.2, 1.0}) resid = std::max(resid, std::abs(tension_partials(solve_Y_tension(e, nu), e, nu).f) /
                                                             std::max(1.0, e * e));
    const double step = 1e-5 * e;
    const double fd = (solve_Y(e + step) - solve_Y(e - step)) / (2 * step);
    deriv = std::max(deriv, std::abs(dY(e) - fd) / std::abs(fd));
  }
  const bool ok = flow <= 1e-6 && resid <= 1e-12 && deriv <= 1e-6;
  return {ok, fmt::format("reduced vs Finsler {:.2e}, Y residual {:.2e}, dY vs FD {:.2e}", flow, resid, deriv)};
}

// 5. Plane and cylindrical waves.
Outcome closed_forms() {
  RunConfig cfg;
  cfg.model.kind = "schrodinger";
  cfg.model.E = 2.0;
  cfg.curve.phi_max = 4.0;
  cfg.grid.n_phi = 41;
  cfg.grid.n_tau = 41;
  cfg.grid.tau_max = 10.0;
  const auto free = make_model(cfg);
  auto make = [&](const InitialCurve& c) {
    auto g = std::make_shared<const LagrangianGrid>(build_manifold(free, c, cfg.grid, cfg.ode));
    return build_atlas(g, detect_caustics(*g), cfg.atlas);
  };
  const auto plane = make(make_curve(cfg, free));
  double err = 0.0;
  for (const Vec2 x : {Vec2(1.0, 3.0), Vec2(2.5, 1.7), Vec2(0.8, 4.4)})
    for (double h : {0.1, 0.01}) {
      const Complex exact = std::exp(Complex(0.0, 2.0 * x.y() / h)) / std::sqrt(2.0);
      err = std::max(err, std::abs(eval_point(plane, x, h, unit_amplitude(), FieldOptions{}).psi - exact));
    }
  cfg.curve.kind = "green";
  cfg.curve.b = 2.0;
  cfg.grid.n_phi = 64;
  const auto circle = make(make_curve(cfg, free));
  std::vector<double> rs, amps;
  for (double r : {0.8, 1.2, 1.8, 2.7, 4.0}) {
    const Vec2 x = r * Vec2(std::cos(0.7 * r), std::sin(0.7 * r));
    const auto psi = eval_point(circle, x, 0.01, unit_amplitude(), FieldOptions{}).psi;
    err = std::max(err, std::abs(psi - std::exp(Complex(0.0, 2.0 * r / 0.01)) / std::sqrt(2.0 * r)));
    rs.push_back(r);
    amps.push_back(std::abs(psi));
  }
  const double slope = loglog_slope(rs, amps);
  return {err <= 1e-8 && std::abs(slope + 0.5) <= 0.02,
          fmt::format("max error {:.2e} (<= 1e-8), radial exponent {:.4f} (-0.5 +- 0.02)", err, slope)};
}

// 6. Factored form convergence at 10 probe points.
Outcome factored() {
  const auto& b = bump();
  const auto probes = factored_probe_points(b.atlas, 10);
  if (probes.size() < 10) return {false, fmt::format("only {} probe points", probes.size())};
  const auto rep = factored_form_check(b.atlas, probes, {1.0 / 25, 1.0 / 50, 1.0 / 100, 1.0 / 200, 1.0 / 400},
                                       unit_amplitude(), 0.3, b.cfg.quad);
  const auto [lo, hi] = std::minmax_element(rep.rates.begin(), rep.rates.end());
  return {*lo >= 0.8, fmt::format("rates {:.2f} .. {:.2f} at {} points (>= 0.8)", *lo, *hi, probes.size())};
}

bool inside(const std::vector<Vec2>& poly, const Vec2& x) {
  bool in = false;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
    if ((poly[i].y() > x.y()) != (poly[j].y() > x.y()) &&
        x.x() < poly[j].x() + (x.y() - poly[j].y()) * (poly[i].x() - poly[j].x()) / (poly[i].y() - poly[j].y()))
      in = !in;
  return in;
}

double segment_distance(const std::vector<Vec2>& poly, const Vec2& x) {
  double d = 1e300;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 e = poly[i] - poly[j];
    const double t = std::clamp((x - poly[j]).dot(e) / e.squaredNorm(), 0.0, 1.0);
    d = std::min(d, (x - poly[j] - t * e).norm());
  }
  return d;
}

// 7. Fold topology: polylines, leaf counts, index jumps and singular indices.
Outcome topology() {
  const auto& b = bump();
  const auto& g = *b.grid;
  const auto& cs = b.atlas.caustics();
  const int folds = static_cast<int>(cs.polylines.size());

  // Each open caustic closed by the chord between its ends bounds its 3-leaf region.
  std::vector<std::vector<Vec2>> regions;
  double chord_y = 1e300;
  for (const auto& pl : cs.polylines) {
    std::vector<Vec2> poly;
    for (const auto& n : pl.nodes) poly.push_back(n.x);
    chord_y = std::min({chord_y, poly.front().y(), poly.back().y()});
    regions.push_back(std::move(poly));
  }
  int n_in = 0, n_out = 0, bad = 0;
  for (int a = 0; 0.5 + 0.05 * a < chord_y - 0.1; ++a)
    for (int c = 0; c <= 160; ++c) {
      const Vec2 x(1.0 + 0.05 * c, 0.5 + 0.05 * a);
      bool near = false, in = false;
      for (const auto& r : regions) {
        near = near || segment_distance(r, x) < 0.08;
        in = in || inside(r, x);
      }
      if (near) continue;
      const int roots = static_cast<int>(solve_regular_roots(b.atlas, x, true).size());
      (in ? n_in : n_out)++;
      if (roots != (in ? 3 : 1)) ++bad;
    }

  int jumps = 0, bad_jumps = 0;
  for (int i = 0; i < g.n_phi(); ++i)
    for (const auto& ev : g.column(i).caustics) {
      ++jumps;
      int below = 0, above = 0;
      for (int j = 0; j < g.column_length(i); ++j) {
        if (g.tau(j) < ev.tau) below = g.at(i, j).morse;
        if (g.tau(j) > ev.tau) {
          above = g.at(i, j).morse;
          break;
        }
      }
      if (ev.multiplicity != 1 || above - below != 1) ++bad_jumps;
    }

  int singular = 0, inconsistent = 0;
  for (const auto& c : b.atlas.charts())
    if (c.kind == ChartKind::singular) {
      ++singular;
      if (!c.index_consistent) ++inconsistent;
    }
  const bool ok = folds == 2 && bad == 0 && n_in > 0 && n_out > 0 && bad_jumps == 0 && jumps > 0 && inconsistent == 0;
  return {ok, fmt::format("{} fold polylines; leaf counts wrong at {} of {} inside / {} outside points; "
                          "{} of {} index jumps not +1; {} of {} singular charts inconsistent",
                          folds, bad, n_in, n_out, bad_jumps, jumps, inconsistent, singular)};
}

// 8. Patching of regular and singular charts across a fold, and the fold amplitude exponent.
Outcome patching() {
  const auto& b = bump();
  const std::vector<double> hs{1.0 / 100, 1.0 / 200, 1.0 / 400, 1.0 / 800};
  std::vector<double> errs;
  for (double h : hs) {
    double num = 0.0, den = 0.0;
    for (int k = 0; k <= 65; ++k) {
      const double x1 = 2.3 + 0.02 * k;
      if (std::abs(x1 - 2.95) < 0.08) continue;
      const Vec2 x(x1, 5.3);
      const auto full = eval_point(b.atlas, x, h, unit_amplitude(), FieldOptions{});
      const auto reg = eval_regular_only(b.atlas, x, h, unit_amplitude(), FieldForm::general);
      num += std::norm(full.psi - reg.psi);
      den += std::norm(reg.psi);
    }
    errs.push_back(std::sqrt(num / den));
  }
  bool ratios_ok = true;
  std::string ratios;
  double c = 0.0;
  for (size_t k = 0; k < hs.size(); ++k) {
    c = std::max(c, errs[k] / hs[k]);
    if (k == 0) continue;
    const double r = errs[k - 1] / errs[k];
    ratios_ok = ratios_ok && r >= 1.4 && r <= 2.6;
    ratios += fmt::format("{}{:.2f}", k == 1 ? "" : "/", r);
  }

  const auto& fold = b.atlas.caustics().polylines.front();
  const double bump_w = 0.3;
  double worst = 0.0;
  std::string exps;
  for (int k : {4, 8, 12, 16, 20}) {
    const auto& nd = fold.nodes[k];
    const auto w = [&](double, double phi) {
      return 1.0 - smootherstep((std::abs(phi - nd.phi) - 0.5 * bump_w) / (0.5 * bump_w));
    };
    std::vector<double> fh, amps;
    for (double h : {1.0 / 3200, 1.0 / 12800, 1.0 / 51200}) {
      const auto r = eval_singular_local(b.atlas, nd.x, h, unit_amplitude(), FieldOptions{}, nd.phi - bump_w,
                                         nd.phi + bump_w, nd.tau, 1, w);
      fh.push_back(h);
      amps.push_back(std::abs(r.value));
    }
    const double p = loglog_slope(fh, amps);
    worst = std::max(worst, std::abs(p + 1.0 / 6.0) / (1.0 / 6.0));
    exps += fmt::format("{}{:.3f}", exps.empty() ? "" : " ", p);
  }
  const bool ok = ratios_ok && worst <= 0.2;
  return {ok, fmt::format("rms rel. difference <= {:.2f} h, halving ratios {} (2 +- 30%); fold exponents {} "
                          "(-1/6 +- 20%)",
                          c, ratios, exps)};
}

// 9. Grid refinement at regular points and byte-identical outputs.
Outcome refinement() {
  const auto& b = bump();
  auto fine_cfg = b.cfg;
  fine_cfg.grid.n_phi = 2 * b.cfg.grid.n_phi - 1;
  fine_cfg.grid.n_tau = 2 * b.cfg.grid.n_tau;
  auto fine_grid = std::make_shared<const LagrangianGrid>(build_manifold(b.model, b.curve, fine_cfg.grid, fine_cfg.ode));
  const auto fine = build_atlas(fine_grid, detect_caustics(*fine_grid), fine_cfg.atlas);

  // Regular probe points: lattice points whose field comes from regular charts alone.
  auto lattice = b.cfg;
  lattice.field.n1 = 17;
  lattice.field.n2 = 12;
  const auto opts = field_options(b.cfg);
  const double h = b.cfg.field.h;
  int probes = 0;
  double worst = 0.0;
  for (const auto& x : field_points(lattice)) {
    const auto a = eval_point(b.atlas, x, h, unit_amplitude(), opts);
    const bool regular = a.leaf_count > 0 && std::none_of(a.contributions.begin(), a.contributions.end(),
                                                          [](const Contribution& c) { return c.kind == ChartKind::singular; });
    if (!regular) continue;
    const auto f = eval_point(fine, x, h, unit_amplitude(), opts).psi;
    worst = std::max(worst, std::abs(a.psi - f) / std::abs(f));
    ++probes;
  }

  auto small = b.cfg;
  small.field.n1 = 9;
  small.field.n2 = 6;
  const auto render = [&](Execution exec) {
    const auto g = std::make_shared<const LagrangianGrid>(build_manifold(b.model, b.curve, small.grid, small.ode, exec));
    const auto at = build_atlas(g, detect_caustics(*g), small.atlas);
    const auto wf = eval_field(at, field_points(small), small.field.h, unit_amplitude(), field_options(small), exec);
    std::ostringstream os;
    os << serialize_config(small);
    write_manifold_csv(os, *g);
    os << atlas_json(at).dump(2) << caustics_json(at.caustics()).dump(2);
    write_wavefield_csv(os, wf);
    os << wavefield_breakdown_json(wf).dump(2);
    write_heatmap_pgm(os, wf, small.field.n1, small.field.n2, &at.caustics());
    write_manifold_svg(os, at);
    return os.str();
  };
  const auto first = render(Execution::parallel);
  const bool same = first == render(Execution::parallel) && first == render(Execution::serial);
  return {worst <= 1e-6 && probes >= 10 && same,
          fmt::format("grid doubling changes psi by {:.2e} (<= 1e-6) at {} regular points; outputs {}", worst, probes,
                      same ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));
  spdlog::set_level(spdlog::level::warn);
  omp_set_num_threads(std::max(2, omp_get_max_threads()));
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, correspondence}, {2, identities},    {3, conservation}, {4, reduced},   {5, closed_forms},
      {6, factored},       {7, topology}, {8, patching},     {9, refinement}};
  bool all = true;
  for (const auto& [n, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    all = all && o.pass;
    fmt::print("criterion {}: {}  {}  [{:.1f} s]\n", n, o.pass ? "PASS" : "FAIL", o.summary, seconds_since(t0));
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
