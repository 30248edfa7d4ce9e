#include "mjw/checks.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <memory>
#include <spdlog/spdlog.h>

#include "mjw/errors.hpp"

namespace mjw {

namespace {

CheckResult at_most(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), value, threshold, value <= threshold, std::move(detail)};
}

CheckResult holds(std::string name, bool ok, std::string detail = {}) {
  return {std::move(name), ok ? 1.0 : 0.0, 1.0, ok, std::move(detail)};
}

// |C|P| - 1| or |F(x, |P|) - E| drift per unit flow parameter along one trajectory.
double drift_rate(const SymbolModel& model, const Trajectory& tr) {
  if (tr.samples.size() < 2) return 0.0;
  const auto residual = [&](const TrajectorySample& s) {
    if (tr.kind == FlowKind::physical) return model.eval_F(s.point.x, s.point.p.norm()) - model.energy();
    return model.dispersion_C(s.point.x) * s.point.p.norm() - 1.0;
  };
  const double r0 = residual(tr.samples.front());
  double worst = 0.0;
  for (const auto& s : tr.samples) worst = std::max(worst, std::abs(residual(s) - r0));
  const double span = tr.samples.back().tau - tr.samples.front().tau;
  const double t_span = tr.samples.back().t - tr.samples.front().t;
  return worst / std::max(1.0, tr.kind == FlowKind::physical ? t_span : span);
}

}  // namespace

bool CheckReport::all_pass() const {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.pass; });
}

std::vector<std::string> CheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& r : results)
    if (!r.pass) out.push_back(r.name);
  return out;
}

json CheckReport::to_json() const {
  json out;
  out["pass"] = all_pass();
  json items = json::array();
  for (const auto& r : results) {
    json j = {{"name", r.name}, {"pass", r.pass}, {"value", r.value}, {"threshold", r.threshold}};
    if (!r.detail.empty()) j["detail"] = r.detail;
    items.push_back(j);
  }
  out["checks"] = items;
  return out;
}

std::vector<double> ray_phis(const InitialCurve& curve, int count) {
  std::vector<double> out;
  const double lo = curve.phi_min(), hi = curve.phi_max();
  const bool circle = curve.domain() == CurveDomain::circle;
  for (int k = 0; k < count; ++k) {
    const double u = circle ? static_cast<double>(k) / count : (k + 0.5) / count;
    out.push_back(lo + u * (hi - lo));
  }
  return out;
}

std::vector<Vec2> factored_probe_points(const Atlas& atlas, int count, double bump, double min_curvature,
                                        double min_separation) {
  const auto& g = atlas.grid();
  struct Candidate {
    double score;
    Vec2 x;
  };
  std::vector<Candidate> best;
  const double tau_max = g.taus().back();
  const int reach = static_cast<int>(std::ceil(bump / g.dphi()));
  for (int i = 0; i < g.n_phi(); ++i) {
    if (!g.periodic() && (i < reach || i + reach >= g.n_phi())) continue;
    const double phi = g.phi(i);
    for (int j = 0; j < g.column_length(i); ++j) {
      const double tau = g.tau(j);
      if (tau < 0.25 * tau_max || tau > 0.85 * tau_max || tau < atlas.tau_min() + bump) continue;
      if (atlas.total_singular_weight(tau, phi) > 0.0) continue;
      bool clear = true;
      const auto v = eikonal_variation(g, i, j);
      const double curvature = std::abs(v.Pphi.dot(v.Xphi));
      if (curvature < min_curvature) continue;
      // The p-chart needs det(P, P_phi) of one sign across the bump.
      const double d0 = det2(g.at(i, j).point.p, v.Pphi);
      for (int di = -reach; di <= reach && clear; ++di) {
        const int ii = g.wrap(i + di);
        if (!g.valid(ii, j)) {
          clear = false;
          break;
        }
        const double d = det2(g.at(ii, j).point.p, eikonal_variation(g, ii, j).Pphi);
        clear = d * d0 > 0.0 && std::abs(d) >= 0.05 * std::abs(d0);
      }
      if (clear) best.push_back({curvature, g.at(i, j).point.x});
    }
  }
  std::stable_sort(best.begin(), best.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  std::vector<Vec2> out;
  for (const auto& c : best) {
    if (static_cast<int>(out.size()) >= count) break;
    bool far = true;
    for (const auto& x : out) far = far && (c.x - x).norm() >= min_separation;
    if (far) out.push_back(c.x);
  }
  return out;
}

CheckReport run_checks(const RunConfig& cfg, Execution exec) {
  cfg.validate();
  CheckReport rep;
  const auto& th = cfg.check;
  const auto model = make_model(cfg);
  const auto curve = make_curve(cfg, model);
  const double horizon = cfg.grid.tau_max;
  const auto phis = ray_phis(curve, th.rays);

  spdlog::info("check: {} rays", phis.size());
  double corr = 0.0, cons_f = 0.0, cons_p = 0.0, reduced = 0.0;
  std::string corr_detail;
  const bool waterwave = model.kind() == ModelKind::waterwave || model.kind() == ModelKind::waterwave_tension;
  for (double phi : phis) {
    const auto ic = curve.point(phi);
    const auto var = curve.variation(phi);
    try {
      const double d = verify_correspondence(model, ic, var, horizon, cfg.ode);
      if (d > corr) {
        corr = d;
        corr_detail = fmt::format("worst ray phi = {}", phi);
      }
    } catch (const DomainViolation& e) {
      corr = std::numeric_limits<double>::infinity();
      corr_detail = fmt::format("ray phi = {}: {}", phi, e.what());
    }
    IntegrateOptions io;
    io.truncate_at_exit = true;
    cons_f = std::max(cons_f, drift_rate(model, integrate(model, FlowKind::finsler, ic, var, horizon, cfg.ode, io)));
    cons_p = std::max(cons_p, drift_rate(model, integrate(model, FlowKind::physical, ic, var, horizon, cfg.ode, io)));
    if (waterwave)
      reduced = std::max(reduced, compare_tau_flows(model, FlowKind::reduced, FlowKind::finsler, ic, var,
                                                    std::min(horizon, 5.0), cfg.ode));
  }
  rep.results.push_back(at_most("correspondence", corr, th.correspondence, corr_detail));
  rep.results.push_back(at_most("conservation_finsler", cons_f, th.conservation));
  rep.results.push_back(at_most("conservation_physical", cons_p, th.conservation));
  if (waterwave) rep.results.push_back(at_most("reduced_flow", reduced, th.correspondence));

  spdlog::info("check: manifold {} x {}", cfg.grid.n_phi, cfg.grid.n_tau);
  const auto grid = std::make_shared<const LagrangianGrid>(build_manifold(model, curve, cfg.grid, cfg.ode, exec));
  const auto caustics = detect_caustics(*grid);
  const auto inv = grid_invariants(*grid, caustics, cfg.atlas.theta_sing);
  rep.results.push_back(at_most("abs_J", inv.abs_J, th.abs_J));
  rep.results.push_back(at_most("chain_rule", inv.chain_rule, th.chain_rule));
  rep.results.push_back(at_most("eikonal", inv.eikonal, th.eikonal));
  rep.results.push_back(at_most("shell", inv.shell, th.shell));
  rep.results.push_back(holds("morse_monotone", inv.morse_monotone));
  rep.results.push_back(holds("morse_matches_caustics", inv.morse_matches_caustics));
  rep.results.push_back(holds("admissible", inv.admissible));

  std::unique_ptr<Atlas> atlas;
  try {
    atlas = std::make_unique<Atlas>(build_atlas(grid, caustics, cfg.atlas));
  } catch (const AtlasFailure& e) {
    rep.results.push_back(holds("atlas", false, e.what()));
    return rep;
  }
  rep.results.push_back(at_most("partition", atlas->partition_error(), th.partition));
  bool consistent = true;
  std::string which;
  for (const auto& c : atlas->charts())
    if (c.kind == ChartKind::singular && !c.index_consistent) {
      consistent = false;
      which += fmt::format("{}chart {}", which.empty() ? "" : ", ", c.id);
    }
  rep.results.push_back(holds("singular_index", consistent, which));

  const auto probes = factored_probe_points(*atlas, 10, 0.3, 10.0);
  if (probes.empty()) {
    rep.results.push_back({"factored_rate", 0.0, th.factored_rate, true, "skipped: no probe point with curved phase"});
  } else {
    spdlog::info("check: factored form at {} points", probes.size());
    const auto fr = factored_form_check(*atlas, probes, {1.0 / 25, 1.0 / 50, 1.0 / 100, 1.0 / 200, 1.0 / 400},
                                        unit_amplitude(), 0.3, cfg.quad);
    const double worst = *std::min_element(fr.rates.begin(), fr.rates.end());
    CheckResult r{"factored_rate", worst, th.factored_rate, worst >= th.factored_rate,
                  fmt::format("{} probe points", probes.size())};
    rep.results.push_back(r);
  }
  return rep;
}

}  // namespace mjw
