#include "mjw/canop.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <cstdint>
#include <limits>

#include <boost/math/tools/toms748_solve.hpp>

#include "mjw/errors.hpp"

namespace mjw {

using namespace std::complex_literals;

std::string to_string(FieldForm form) {
  switch (form) {
    case FieldForm::general:
      return "general";
    case FieldForm::factored:
      return "factored";
    case FieldForm::waterwave_specialized:
      return "waterwave_specialized";
  }
  return "?";
}

FieldForm field_form_from_string(const std::string& name) {
  if (name == "general") return FieldForm::general;
  if (name == "factored") return FieldForm::factored;
  if (name == "waterwave_specialized") return FieldForm::waterwave_specialized;
  throw ConfigError(fmt::format("unknown field form '{}'", name));
}

Amplitude unit_amplitude() {
  return [](double, double, double) { return Complex(1.0, 0.0); };
}

void FieldOptions::validate() const {
  if (!(panel_period_fraction > 0.0 && panel_period_fraction <= 1.0))
    throw ConfigError("field panel_period_fraction must lie in (0, 1]");
  quad.validate();
}

namespace {

Complex maslov_phase(int m) {
  switch (((m % 4) + 4) % 4) {
    case 0:
      return 1.0;
    case 1:
      return -1i;
    case 2:
      return -1.0;
    default:
      return 1i;
  }
}

void require_waterwave(const SymbolModel& model) {
  if (model.kind() != ModelKind::waterwave)
    throw ConfigError("the waterwave_specialized form needs a waterwave model");
}

// D P^2 - D E^4 + E^2, i.e. 2 E R on the shell.
double waterwave_denominator(const SymbolModel& model, const Vec2& X, const Vec2& P) {
  const double D = model.D().value(X), E = model.energy();
  return D * P.squaredNorm() - D * E * E * E * E + E * E;
}

RegularRoot root_from_sample(const LagrangianGrid& g, const TrajectorySample& s, double phi) {
  const double ds0 = g.curve().s0_prime(phi);
  RegularRoot r;
  r.tau = s.tau;
  r.phi = phi;
  r.t = s.t;
  r.morse = s.morse;
  r.X = s.point.x;
  r.P = s.point.p;
  r.X_tau = s.velocity.dx;
  r.X_phi = s.var.Xphi - ds0 * s.velocity.dx;
  r.P_phi = s.var.Pphi - ds0 * s.velocity.dp;
  r.s_tilde = s.s;
  r.J = s.J;
  return r;
}

std::optional<TrajectorySample> fresh_sample(const LagrangianGrid& g, double tau, double phi) {
  IntegrateOptions opts;
  opts.sample_at = {tau};
  opts.truncate_at_exit = true;
  opts.morse_start = g.tau_start();
  opts.s0 = g.curve().s0(phi);
  const auto tr = integrate(g.model(), FlowKind::finsler, g.curve().point(phi), g.curve().variation(phi), tau,
                            g.ode(), opts);
  if (tr.samples.empty() || tr.truncated) return std::nullopt;
  return tr.samples.back();
}

// Newton on the interpolant from the centre of cell (i, j).
std::optional<std::pair<double, double>> newton_interp(const ManifoldInterpolant& interp, const Vec2& x, int i, int j,
                                                       double tol) {
  const auto& g = interp.grid();
  double tau = g.tau(j) + 0.5 * (g.tau(j + 1) - g.tau(j));
  double phi = g.phi(i) + 0.5 * (interp.phi_right(i) - g.phi(i));
  for (int it = 0; it < 40; ++it) {
    ManifoldPoint mp;
    if (!interp.eval(tau, phi, mp)) return std::nullopt;
    const Vec2 r = mp.X - x;
    if (r.norm() <= tol) return std::make_pair(tau, phi);
    const double det = det2(mp.X_tau, mp.X_phi);
    if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
    double dt = -det2(r, mp.X_phi) / det;
    double dp = -det2(mp.X_tau, r) / det;
    const double scale = std::max(std::abs(dt) / (4.0 * g.dtau()), std::abs(dp) / (4.0 * g.dphi()));
    if (scale > 1.0) {
      dt /= scale;
      dp /= scale;
    }
    tau += dt;
    phi += dp;
  }
  return std::nullopt;
}

std::optional<RegularRoot> polish_root(const LagrangianGrid& g, const Vec2& x, double tau, double phi, double tol) {
  for (int it = 0; it < 6; ++it) {
    const auto s = fresh_sample(g, tau, phi);
    if (!s) return std::nullopt;
    const Vec2 r = s->point.x - x;
    if (r.norm() <= tol || it == 5) {
      RegularRoot root = root_from_sample(g, *s, phi);
      root.residual = r.norm();
      if (root.residual > 1e3 * tol) return std::nullopt;
      return root;
    }
    const double det = det2(s->velocity.dx, s->var.Xphi);
    if (det == 0.0) return std::nullopt;
    tau += -det2(r, s->var.Xphi) / det;
    phi += -det2(s->velocity.dx, r) / det;
    if (!(tau > 0.0)) return std::nullopt;
  }
  return std::nullopt;
}

double phi_distance(const LagrangianGrid& g, double a, double b) {
  double d = std::abs(a - b);
  if (g.periodic()) d = std::min(d, std::abs(g.phi_period() - d));
  return d;
}

}  // namespace

std::vector<RegularRoot> solve_regular_roots(const Atlas& atlas, const Vec2& x, bool polish) {
  const auto& interp = atlas.interp();
  const auto& g = atlas.grid();
  const double tol = 1e-10 * std::max(1.0, interp.x_diameter());
  std::vector<std::pair<double, double>> found;
  for (const auto& [i, j] : interp.candidate_cells(x)) {
    const auto r = newton_interp(interp, x, i, j, tol);
    if (!r) continue;
    const double phi = interp.normalize_phi(r->second);
    bool dup = false;
    for (const auto& f : found)
      if (std::abs(f.first - r->first) <= 1e-8 && phi_distance(g, f.second, phi) <= 1e-8) dup = true;
    if (!dup) found.push_back({r->first, phi});
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.second < b.second || (a.second == b.second && a.first < b.first); });

  std::vector<RegularRoot> roots;
  for (const auto& [tau, phi] : found) {
    if (tau < atlas.tau_min()) continue;
    std::optional<RegularRoot> root;
    if (polish) {
      root = polish_root(g, x, tau, phi, tol);
      if (!root) {
        spdlog::debug("root polishing failed near tau = {}, phi = {} for x = ({}, {})", tau, phi, x.x(), x.y());
        continue;
      }
      root->phi = interp.normalize_phi(root->phi);
    } else {
      ManifoldPoint mp;
      interp.eval(tau, phi, mp);
      RegularRoot r;
      r.tau = tau;
      r.phi = phi;
      r.t = mp.t;
      r.X = mp.X;
      r.P = mp.P;
      r.X_tau = mp.X_tau;
      const double ds0 = g.curve().s0_prime(phi);
      r.X_phi = mp.X_phi - ds0 * mp.X_tau;
      r.P_phi = mp.P_phi - ds0 * mp.P_tau;
      r.s_tilde = mp.s_tilde;
      r.J = mp.J();
      r.residual = (mp.X - x).norm();
      int i = 0, j = 0;
      interp.locate(tau, phi, i, j);
      const int i1 = g.wrap(i + 1);
      const int near = phi - g.phi(i) <= interp.phi_right(i) - phi ? i : i1;
      r.morse = 0;
      for (const auto& ev : g.column(near).caustics)
        if (ev.tau <= tau) r.morse += ev.multiplicity;
      root = r;
    }
    bool dup = false;
    for (const auto& q : roots)
      if (std::abs(q.tau - root->tau) <= 1e-8 && phi_distance(g, q.phi, root->phi) <= 1e-8) dup = true;
    if (!dup) roots.push_back(*root);
  }
  return roots;
}

std::vector<RegularRoot> solve_regular_roots(const Atlas& atlas, const Chart& chart, const Vec2& x, bool polish) {
  std::vector<RegularRoot> out;
  if (chart.kind != ChartKind::regular) return out;
  for (const auto& r : solve_regular_roots(atlas, x, polish))
    if (atlas.chart_weight(chart, r.tau, r.phi, r.morse) > 0.0) out.push_back(r);
  return out;
}

Complex regular_branch(const Atlas& atlas, const RegularRoot& root, double h, const Amplitude& A, FieldForm form) {
  const auto& model = atlas.grid().model();
  double amp = 0.0;
  if (form == FieldForm::waterwave_specialized) {
    require_waterwave(model);
    const double E = model.energy();
    amp = std::sqrt(2.0 * E * root.P.norm() / waterwave_denominator(model, root.X, root.P)) /
          std::sqrt(root.X_phi.norm());
  } else {
    const double R = model.factor_R(root.X);
    const double C = model.dispersion_C(root.X);
    amp = 1.0 / std::sqrt(std::abs(R * C * root.X_phi.norm()));
  }
  return maslov_phase(root.morse) * amp * std::exp(1i * (root.s_tilde / h)) * A(root.tau, root.t, root.phi);
}

Complex eval_regular(const Atlas& atlas, const Chart& chart, const Vec2& x, double h, const Amplitude& A,
                     FieldForm form, bool polish) {
  Complex sum = 0.0;
  for (const auto& r : solve_regular_roots(atlas, chart, x, polish))
    sum += atlas.chart_weight(chart, r.tau, r.phi, r.morse) * regular_branch(atlas, r, h, A, form);
  return sum;
}

// --- Singular charts ----------------------------------------------------------------

namespace {

std::optional<double> singular_tau_from(const ManifoldInterpolant& interp, const Vec2& x, double phi, double tau) {
  const auto& g = interp.grid();
  const double lo = g.tau_start(), hi = g.taus().back();
  for (int it = 0; it < 40; ++it) {
    ManifoldPoint mp;
    if (!interp.eval(tau, phi, mp)) return std::nullopt;
    const Vec2 d = x - mp.X;
    const double f = mp.P.dot(d);
    const double df = mp.P_tau.dot(d) - mp.P.dot(mp.X_tau);
    if (std::abs(f) <= 1e-12 * std::max(1.0, mp.P.norm() * d.norm())) return tau;
    if (df == 0.0 || !std::isfinite(df)) return std::nullopt;
    double step = -f / df;
    step = std::clamp(step, -2.0, 2.0);
    tau = std::clamp(tau + step, lo, hi);
  }
  return std::nullopt;
}

struct SingularSetup {
  double phi_lo, phi_hi;
  std::function<std::optional<double>(double)> tau_of_phi;
  std::function<double(double, double)> weight;
  int maslov;
};

SingularResult singular_integral(const Atlas& atlas, const Vec2& x, double h, const Amplitude& A, FieldForm form,
                                 const SingularSetup& st, const FieldOptions& opts) {
  const auto& g = atlas.grid();
  const auto& model = g.model();
  const auto& interp = atlas.interp();
  if (form == FieldForm::waterwave_specialized) require_waterwave(model);

  struct Sample {
    bool ok = false;
    double S = 0.0;
    Complex value;
  };
  const auto point = [&](double phi) {
    Sample out;
    const auto tau = st.tau_of_phi(phi);
    if (!tau || *tau < atlas.tau_min()) return out;
    const double w = st.weight(*tau, phi);
    if (w <= 0.0) return out;
    ManifoldPoint mp;
    if (!interp.eval(*tau, phi, mp)) return out;
    const Vec2 Pphi = mp.P_phi - g.curve().s0_prime(mp.phi) * mp.P_tau;
    double factor = 1.0;
    if (form == FieldForm::general) {
      factor = 1.0 / std::sqrt(std::abs(model.factor_R(mp.X)));
    } else if (form == FieldForm::waterwave_specialized) {
      factor = std::sqrt(2.0 * model.energy() / waterwave_denominator(model, mp.X, mp.P));
    }
    out.ok = true;
    out.S = mp.s_tilde;
    out.value = std::exp(1i * (mp.s_tilde / h)) * std::sqrt(std::abs(det2(mp.P, Pphi))) * A(*tau, mp.t, mp.phi) * w *
                factor;
    return out;
  };

  SingularResult res;
  // Probe the support and the phase slope to size the initial panels.
  constexpr int probes = 256;
  double max_slope = 0.0;
  bool any = false;
  bool have_prev = false;
  double prev_phi = 0.0, prev_S = 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const double dphi = (st.phi_hi - st.phi_lo) / probes;
  for (int k = 0; k <= probes; ++k) {
    const double phi = st.phi_lo + k * dphi;
    const Sample s = point(phi);
    if (!s.ok) {
      have_prev = false;
      continue;
    }
    any = true;
    lo = std::min(lo, phi - dphi);
    hi = std::max(hi, phi + dphi);
    if (have_prev) max_slope = std::max(max_slope, std::abs(s.S - prev_S) / (phi - prev_phi));
    have_prev = true;
    prev_phi = phi;
    prev_S = s.S;
  }
  if (!any) return res;
  lo = std::max(lo, st.phi_lo);
  hi = std::min(hi, st.phi_hi);
  const double period = 2.0 * kPi * h / std::max(max_slope, 1e-12);
  const int panels = std::max(8, static_cast<int>(std::ceil((hi - lo) / (opts.panel_period_fraction * period))));
  res.quad = integrate_gk15([&](double phi) { return point(phi).value; }, lo, hi, panels, opts.quad);

  Complex pre = maslov_phase(st.maslov) * std::exp(1i * (kPi / 4.0)) / std::sqrt(2.0 * kPi * h);
  if (form == FieldForm::factored) pre /= std::sqrt(std::abs(model.factor_R(x)));
  res.value = pre * res.quad.value;
  return res;
}

}  // namespace

std::optional<double> solve_singular_tau(const Atlas& atlas, const Chart& chart, const Vec2& x, double phi) {
  if (chart.kind != ChartKind::singular) return std::nullopt;
  const auto& g = atlas.grid();
  const auto& interp = atlas.interp();
  auto [lo, hi] = atlas.tube_tau_range(chart.polyline, phi);
  lo = std::max(lo, std::max(g.tau_start(), atlas.tau_min()));
  hi = std::min(hi, g.taus().back());
  if (!(lo < hi)) return std::nullopt;

  const auto f = [&](double tau, bool& ok) {
    ManifoldPoint mp;
    ok = interp.eval(tau, phi, mp);
    return ok ? mp.P.dot(x - mp.X) : 0.0;
  };
  // Scan the tube's tau-range for sign changes and keep the root deepest inside the tube.
  const int steps = std::max(2, static_cast<int>(std::ceil((hi - lo) / g.dtau())));
  std::optional<double> best;
  double best_w = 0.0;
  bool ok_prev = false;
  double t_prev = lo, f_prev = f(lo, ok_prev);
  for (int k = 1; k <= steps; ++k) {
    const double t = lo + (hi - lo) * k / steps;
    bool ok = false;
    const double ft = f(t, ok);
    if (ok && ok_prev && (f_prev == 0.0 || (f_prev > 0.0) != (ft > 0.0))) {
      bool inner = true;
      std::uintmax_t iters = 60;
      const auto root = boost::math::tools::toms748_solve(
          [&](double tau) { return f(tau, inner); }, t_prev, t, f_prev, ft,
          boost::math::tools::eps_tolerance<double>(50), iters);
      const double tau = 0.5 * (root.first + root.second);
      const double w = atlas.singular_weight(chart.polyline, tau, phi);
      if (w > best_w) {
        best_w = w;
        best = tau;
      }
    }
    ok_prev = ok;
    t_prev = t;
    f_prev = ft;
  }
  return best;
}

SingularResult eval_singular(const Atlas& atlas, const Chart& chart, const Vec2& x, double h, const Amplitude& A,
                             const FieldOptions& opts, const std::function<double(double, double)>& weight) {
  if (chart.kind != ChartKind::singular) throw Error("eval_singular needs a singular chart");
  const auto& g = atlas.grid();
  SingularSetup st;
  st.phi_lo = chart.phi_lo;
  st.phi_hi = chart.phi_hi;
  if (!g.periodic()) {
    st.phi_lo = std::max(st.phi_lo, g.phis().front());
    st.phi_hi = std::min(st.phi_hi, g.phis().back());
  }
  st.tau_of_phi = [&](double phi) { return solve_singular_tau(atlas, chart, x, phi); };
  st.weight = weight ? weight : [&](double tau, double phi) { return atlas.chart_weight(chart, tau, phi, 0); };
  st.maslov = chart.maslov;
  return singular_integral(atlas, x, h, A, opts.form, st, opts);
}

SingularResult eval_singular_local(const Atlas& atlas, const Vec2& x, double h, const Amplitude& A,
                                   const FieldOptions& opts, double phi_lo, double phi_hi, double tau_seed, int maslov,
                                   const std::function<double(double tau, double phi)>& weight) {
  SingularSetup st;
  st.phi_lo = phi_lo;
  st.phi_hi = phi_hi;
  st.tau_of_phi = [&](double phi) { return singular_tau_from(atlas.interp(), x, phi, tau_seed); };
  st.weight = weight;
  st.maslov = maslov;
  return singular_integral(atlas, x, h, A, opts.form, st, opts);
}

// --- Field ----------------------------------------------------------------------------

FieldPoint eval_point(const Atlas& atlas, const Vec2& x, double h, const Amplitude& A, const FieldOptions& opts) {
  if (!(h > 0.0)) throw ConfigError("h must be positive");
  FieldPoint fp;
  fp.x = x;
  const auto roots = solve_regular_roots(atlas, x, opts.polish);
  fp.leaf_count = static_cast<int>(roots.size());
  for (const auto& chart : atlas.charts()) {
    if (chart.kind == ChartKind::regular) {
      Contribution c;
      c.chart = chart.id;
      c.kind = chart.kind;
      for (const auto& r : roots) {
        const double w = atlas.chart_weight(chart, r.tau, r.phi, r.morse);
        if (w <= 0.0) continue;
        c.value += w * regular_branch(atlas, r, h, A, opts.form);
        c.roots.push_back({r.tau, r.phi});
      }
      if (!c.roots.empty()) fp.contributions.push_back(std::move(c));
    } else if (opts.include_singular) {
      const auto res = eval_singular(atlas, chart, x, h, A, opts);
      if (res.quad.panels == 0) continue;
      fp.contributions.push_back({chart.id, chart.kind, res.value, {}});
    }
  }
  for (const auto& c : fp.contributions) fp.psi += c.value;
  return fp;
}

FieldPoint eval_regular_only(const Atlas& atlas, const Vec2& x, double h, const Amplitude& A, FieldForm form,
                             bool polish) {
  FieldPoint fp;
  fp.x = x;
  const auto roots = solve_regular_roots(atlas, x, polish);
  fp.leaf_count = static_cast<int>(roots.size());
  for (const auto& r : roots) {
    const Complex v = regular_branch(atlas, r, h, A, form);
    fp.contributions.push_back({-1, ChartKind::regular, v, {{r.tau, r.phi}}});
    fp.psi += v;
  }
  return fp;
}

Wavefield eval_field(const Atlas& atlas, const std::vector<Vec2>& points, double h, const Amplitude& A,
                     const FieldOptions& opts, Execution exec) {
  opts.validate();
  if (!(h > 0.0)) throw ConfigError("h must be positive");
  Wavefield wf;
  wf.h = h;
  wf.form = opts.form;
  wf.points.resize(points.size());
  std::vector<char> quad_failed(points.size(), 0);
  const long n = static_cast<long>(points.size());
  const auto one = [&](long k) {
    const auto idx = static_cast<size_t>(k);
    try {
      wf.points[idx] = eval_point(atlas, points[idx], h, A, opts);
    } catch (const QuadratureNotConverged& e) {
      wf.points[idx].x = points[idx];
      wf.points[idx].error = e.what();
      quad_failed[idx] = 1;
    } catch (const std::exception& e) {
      wf.points[idx].x = points[idx];
      wf.points[idx].error = e.what();
    }
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (long k = 0; k < n; ++k) one(k);
  } else {
    for (long k = 0; k < n; ++k) one(k);
  }
  std::string failed;
  bool any_quad = false;
  int count = 0;
  for (size_t k = 0; k < wf.points.size(); ++k) {
    if (wf.points[k].error.empty()) continue;
    any_quad = any_quad || quad_failed[k];
    if (++count <= 20)
      failed += fmt::format("\n  ({}, {}): {}", wf.points[k].x.x(), wf.points[k].x.y(), wf.points[k].error);
  }
  if (count > 0) {
    const std::string msg = fmt::format("field evaluation failed at {} point(s):{}", count, failed);
    if (any_quad) throw QuadratureNotConverged(msg);
    throw Error(msg);
  }
  return wf;
}

// --- Factored form ------------------------------------------------------------------

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("loglog_slope needs two or more pairs");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (size_t k = 0; k < x.size(); ++k) {
    const double lx = std::log(x[k]), ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

FactoredReport factored_form_check(const Atlas& atlas, const std::vector<Vec2>& points, const std::vector<double>& hs,
                                   const Amplitude& A, double bump, const QuadSettings& quad) {
  const auto& g = atlas.grid();
  const auto& model = g.model();
  FactoredReport rep;
  FieldOptions opts;
  opts.quad = quad;
  for (const auto& x : points) {
    const auto roots = solve_regular_roots(atlas, x, true);
    if (roots.empty()) throw Error(fmt::format("factored_form_check: no regular root at ({}, {})", x.x(), x.y()));

    // Amplitude divided by sqrt(dtau/dt) along the physical flow vs divided by sqrt(R(X)).
    for (const auto& r : roots) {
      IntegrateOptions io;
      io.keep_dense = true;
      const auto phys = integrate(model, FlowKind::physical, g.curve().point(r.phi), g.curve().variation(r.phi),
                                  r.t * 1.01 + 1e-3, g.ode(), io);
      const TimeMap map = reparametrize(phys);
      const double dt = 1e-4 * std::max(1.0, r.t);
      const double rate = (map.tau_of_t(r.t + dt) - map.tau_of_t(r.t - dt)) / (2.0 * dt);
      const double divided = 1.0 / std::sqrt(model.factor_R(r.X));
      const double transported = 1.0 / std::sqrt(rate);
      rep.transported_vs_divided = std::max(rep.transported_vs_divided, std::abs(transported - divided) / divided);
    }

    std::vector<double> disc;
    for (double h : hs) {
      FactoredRow row;
      row.x = x;
      row.h = h;
      for (const auto& r : roots) {
        const bool same = (r.J > 0.0) == (det2(r.P, r.P_phi) > 0.0);
        SingularSetup st;
        st.phi_lo = r.phi - bump;
        st.phi_hi = r.phi + bump;
        st.tau_of_phi = [&](double phi) { return singular_tau_from(atlas.interp(), x, phi, r.tau); };
        st.weight = [&](double, double phi) {
          return 1.0 - smootherstep((std::abs(phi - r.phi) - 0.5 * bump) / (0.5 * bump));
        };
        st.maslov = r.morse + (same ? 0 : 1);
        row.inside += singular_integral(atlas, x, h, A, FieldForm::general, st, opts).value;
        row.outside += singular_integral(atlas, x, h, A, FieldForm::factored, st, opts).value;
      }
      row.discrepancy = std::abs(row.inside - row.outside) / std::abs(row.outside);
      disc.push_back(row.discrepancy);
      rep.rows.push_back(row);
    }
    rep.rates.push_back(hs.size() >= 2 ? loglog_slope(hs, disc) : 0.0);
  }
  return rep;
}

}  // namespace mjw
