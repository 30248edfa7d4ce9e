#include "mjw/flows.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "mjw/errors.hpp"

namespace mjw {

std::string to_string(FlowKind kind) {
  switch (kind) {
    case FlowKind::physical: return "physical";
    case FlowKind::finsler: return "finsler";
    case FlowKind::reduced: return "reduced";
  }
  return "?";
}

namespace {

using Quad = std::array<Jet4, 4>;  // (dx1, dx2, dp1, dp2)

Quad waterwave_reduced_jets(const ScalarField2D& D, double E, const Vec2& x, const Vec2& p) {
  const Jet2 Dj = D.jet(x);
  if (!(Dj.v > 0.0)) throw DomainViolation(fmt::format("depth D = {} not positive at ({}, {})", Dj.v, x.x(), x.y()));
  const Jet4 D4 = lift<4>(Dj);
  const Jet4 p1 = Jet4::variable(p.x(), 2), p2 = Jet4::variable(p.y(), 3);
  const Jet4 pp = p1 * p1 + p2 * p2;
  const double E2 = E * E, E4 = E2 * E2;
  const Jet4 coef = -(pp - E4) / (D4 * pp + E2 - D4 * E4);
  return {p1 / pp, p2 / pp, coef * partial_as_jet<4>(Dj, 0), coef * partial_as_jet<4>(Dj, 1)};
}

// Implicit derivative of the tension dispersion root written in (y, D, mu):
// f = y tanh y - E^2 D^3 / (D^2 + y^2 mu), which equals f(y, calE, nu) with
// calE^2 = E^2 D and nu^4 = E^4 mu, and stays regular as mu -> 0.
std::array<Jet4, 2> tension_grad_Y_jets(const Jet2& Dj, const Jet2& muj, double E, const Jet4& y) {
  const Jet4 D = lift<4>(Dj), mu = lift<4>(muj);
  const double E2 = E * E;
  const Jet4 q = D * D + y * y * mu;
  const Jet4 q2 = q * q;
  const Jet4 D3 = D * D * D;
  const Jet4 t = tanh(y);
  const Jet4 fy = t + y * (1.0 - t * t) + 2.0 * E2 * D3 * y * mu / q2;
  const Jet4 fD = -E2 * D * D * (D * D + 3.0 * y * y * mu) / q2;
  const Jet4 fmu = E2 * D3 * y * y / q2;
  std::array<Jet4, 2> g;
  for (int k = 0; k < 2; ++k)
    g[k] = -(fD * partial_as_jet<4>(Dj, k) + fmu * partial_as_jet<4>(muj, k)) / fy;
  return g;
}

Quad tension_reduced_jets(const ScalarField2D& Dfield, const ScalarField2D& mufield, double E, const Vec2& x,
                          const Vec2& p) {
  const Jet2 Dj = Dfield.jet(x);
  const Jet2 muj = mufield.jet(x);
  if (!(Dj.v > 0.0)) throw DomainViolation(fmt::format("depth D = {} not positive at ({}, {})", Dj.v, x.x(), x.y()));
  if (!(muj.v >= 0.0)) throw DomainViolation(fmt::format("surface tension negative at ({}, {})", x.x(), x.y()));
  const Jet4 D = lift<4>(Dj);
  const Jet4 p1 = Jet4::variable(p.x(), 2), p2 = Jet4::variable(p.y(), 3);
  const Jet4 pp = p1 * p1 + p2 * p2;
  const Jet4 pn = sqrt(pp);
  const Jet4 y = D * pn;
  const auto gY = tension_grad_Y_jets(Dj, muj, E, y);
  Quad f{p1 / pp, p2 / pp, Jet4(0.0), Jet4(0.0)};
  for (int k = 0; k < 2; ++k) f[2 + k] = -pn * (partial_as_jet<4>(Dj, k) / y - D * gY[k] / (y * y));
  return f;
}

PhaseVelocity velocity_of(const Quad& f) {
  return {{f[0].v, f[1].v}, {f[2].v, f[3].v}};
}

PhaseVelocity hamiltonian_velocity(const Jet4& H) {
  return {{H.g[2], H.g[3]}, {-H.g[0], -H.g[1]}};
}

void check_reduced_shell(const SymbolModel& model, const PhasePoint& pt) {
  const double res = model.shell_residual(pt.x, pt.p);
  if (res > 1e-6)
    throw ShellViolation(fmt::format("reduced flow: |C|p| - 1| = {} at ({}, {})", res, pt.x.x(), pt.x.y()));
}

}  // namespace

PhaseVelocity rhs_physical(const SymbolModel& model, const PhasePoint& pt) {
  return hamiltonian_velocity(model.physical_hamiltonian(pt.x, pt.p));
}

PhaseVelocity rhs_finsler(const SymbolModel& model, const PhasePoint& pt) {
  return hamiltonian_velocity(model.finsler_hamiltonian(pt.x, pt.p));
}

PhaseVelocity rhs_waterwave_reduced(const ScalarField2D& D, double E, const PhasePoint& pt) {
  check_reduced_shell(SymbolModel::waterwave(E, D), pt);
  return velocity_of(waterwave_reduced_jets(D, E, pt.x, pt.p));
}

PhaseVelocity rhs_tension_reduced(const ScalarField2D& D, const ScalarField2D& mu, double E, const PhasePoint& pt) {
  check_reduced_shell(SymbolModel::waterwave_tension(E, D, mu), pt);
  return velocity_of(tension_reduced_jets(D, mu, E, pt.x, pt.p));
}

Vec2 tension_grad_Y_onshell(const ScalarField2D& D, const ScalarField2D& mu, double E, const PhasePoint& pt) {
  const Jet2 Dj = D.jet(pt.x);
  const auto g = tension_grad_Y_jets(Dj, mu.jet(pt.x), E, Jet4(Dj.v * pt.p.norm()));
  return {g[0].v, g[1].v};
}

// --- Augmented system ----------------------------------------------------------

FlowState pack_state(const PhasePoint& pt, const Variation& var, double s, double other_time) {
  FlowState y;
  y << pt.x, pt.p, var.Xphi, var.Pphi, s, other_time;
  return y;
}

AugmentedFlow::AugmentedFlow(const SymbolModel& model, FlowKind kind) : model_(model), kind_(kind) {
  if (kind == FlowKind::reduced && model.kind() != ModelKind::waterwave &&
      model.kind() != ModelKind::waterwave_tension)
    throw ConfigError("reduced flow is defined for the water-wave models only");
}

FlowState AugmentedFlow::operator()(const FlowState& y) const {
  const Vec2 x(y[0], y[1]), p(y[2], y[3]);
  const double v[4] = {y[4], y[5], y[6], y[7]};
  FlowState d;
  if (kind_ == FlowKind::reduced) {
    const Quad f = model_.kind() == ModelKind::waterwave
                       ? waterwave_reduced_jets(model_.D(), model_.energy(), x, p)
                       : tension_reduced_jets(model_.D(), model_.mu(), model_.energy(), x, p);
    for (int i = 0; i < 4; ++i) {
      d[i] = f[i].v;
      d[4 + i] = f[i].g[0] * v[0] + f[i].g[1] * v[1] + f[i].g[2] * v[2] + f[i].g[3] * v[3];
    }
    d[9] = 1.0 / model_.factor_R_onshell_unchecked(x, p);
  } else {
    const Jet4 H = kind_ == FlowKind::physical ? model_.physical_hamiltonian(x, p)
                                               : model_.finsler_hamiltonian(x, p);
    d[0] = H.g[2];
    d[1] = H.g[3];
    d[2] = -H.g[0];
    d[3] = -H.g[1];
    for (int i = 0; i < 2; ++i) {
      double dx = 0.0, dp = 0.0;
      for (int k = 0; k < 4; ++k) {
        dx += H.hess(2 + i, k) * v[k];
        dp -= H.hess(i, k) * v[k];
      }
      d[4 + i] = dx;
      d[6 + i] = dp;
    }
    const double R = model_.factor_R(x);
    d[9] = kind_ == FlowKind::physical ? R : 1.0 / R;
  }
  d[8] = p.x() * d[0] + p.y() * d[1];
  return d;
}

double AugmentedFlow::factor_R(const FlowState& y) const {
  const Vec2 x(y[0], y[1]);
  if (kind_ == FlowKind::reduced) return model_.factor_R_onshell_unchecked(x, Vec2(y[2], y[3]));
  return model_.factor_R(x);
}

double AugmentedFlow::jacobian(const FlowState& y, const FlowState& dy) const {
  return dy[0] * y[5] - dy[1] * y[4];
}

TrajectorySample AugmentedFlow::sample(double param, const FlowState& y, int morse) const {
  const FlowState d = (*this)(y);
  TrajectorySample s;
  s.point = {{y[0], y[1]}, {y[2], y[3]}};
  s.var = {{y[4], y[5]}, {y[6], y[7]}};
  s.s = y[8];
  s.velocity = {{d[0], d[1]}, {d[2], d[3]}};
  s.var_velocity = {{d[4], d[5]}, {d[6], d[7]}};
  s.morse = morse;
  const double R = factor_R(y);
  const double Jp = jacobian(y, d);
  if (kind_ == FlowKind::physical) {
    s.t = param;
    s.tau = y[9];
    s.J_phys = Jp;
    s.J = Jp / R;
  } else {
    s.tau = param;
    s.t = y[9];
    s.J = Jp;
    s.J_phys = R * Jp;
  }
  return s;
}

// --- Integration -------------------------------------------------------------

FlowState Trajectory::state_at(double param) const {
  if (dense.empty()) throw Error("trajectory was integrated without dense output");
  auto it = std::upper_bound(dense.begin(), dense.end(), param,
                             [](double v, const DenseStep<kFlowDim>& st) { return v < st.t0; });
  if (it != dense.begin()) --it;
  return it->eval(std::clamp(param, it->t0, it->t1()));
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Zero of a sign-changing scalar function on [a, b] by the Illinois variant of
// regula falsi.
template <class Fn>
double illinois(Fn&& fn, double a, double fa, double b, double fb, double ftol) {
  int side = 0;
  double c = a;
  for (int it = 0; it < 100; ++it) {
    c = (a * fb - b * fa) / (fb - fa);
    if (!(c > a && c < b)) c = 0.5 * (a + b);
    const double fc = fn(c);
    if (!std::isfinite(fc) || std::abs(fc) <= ftol) return c;
    if ((fc > 0) == (fb > 0)) {
      b = c;
      fb = fc;
      if (side == -1) fa *= 0.5;
      side = -1;
    } else {
      a = c;
      fa = fc;
      if (side == 1) fb *= 0.5;
      side = 1;
    }
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(c))) break;
  }
  return c;
}

struct Zero {
  double at;
  int multiplicity;
};

// Zeros of J inside one accepted step.
std::vector<Zero> step_zeros(const AugmentedFlow& flow, const DenseStep<kFlowDim>& st, double grazing_abs,
                             std::vector<std::pair<double, double>>& grazing) {
  const auto exact = [&](double u) {
    const FlowState y = st.eval(u);
    try {
      return flow.jacobian(y, flow(y));
    } catch (const DomainViolation&) {
      return kNaN;
    }
  };
  std::array<double, 5> u, J;
  for (int j = 0; j < 5; ++j) u[j] = st.t0 + 0.25 * j * st.h;
  u[4] = st.t1();
  J[0] = flow.jacobian(st.start(), st.f0);
  J[4] = flow.jacobian(st.end(), st.f1);
  for (int j = 1; j < 4; ++j) J[j] = flow.jacobian(st.eval(u[j]), st.derivative(u[j]));

  double scale = 0.0;
  for (double v : J) scale = std::max(scale, std::abs(v));
  const double ftol = 1e-10 * scale;
  std::vector<Zero> zeros;
  for (int j = 0; j < 4; ++j) {
    if (J[j] * J[j + 1] < 0.0) zeros.push_back({illinois(exact, u[j], J[j], u[j + 1], J[j + 1], ftol), 1});
  }
  if (!zeros.empty() || J[0] == 0.0 || J[4] == 0.0) return zeros;

  // No sign change: look for an interior minimum of |J| that may touch zero.
  int jm = 0;
  for (int j = 1; j < 5; ++j)
    if (std::abs(J[j]) < std::abs(J[jm])) jm = j;
  if (jm == 0 || jm == 4 || std::abs(J[jm]) > 0.5 * std::max(std::abs(J[0]), std::abs(J[4]))) return zeros;
  const double sgn = J[jm] > 0 ? 1.0 : -1.0;
  double a = u[jm - 1], b = u[jm + 1];
  constexpr double g = 0.6180339887498949;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = sgn * exact(c), fd = sgn * exact(d);
  for (int it = 0; it < 60 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
    if (fc < 0.0 || fd < 0.0) {
      // Two sign changes hidden inside the step.
      const double m = fc < 0.0 ? c : d;
      const double fm = sgn * (fc < 0.0 ? fc : fd);
      const double fa = exact(u[jm - 1]), fb = exact(u[jm + 1]);
      zeros.push_back({illinois(exact, u[jm - 1], fa, m, fm, ftol), 1});
      zeros.push_back({illinois(exact, m, fm, u[jm + 1], fb, ftol), 1});
      return zeros;
    }
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = sgn * exact(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = sgn * exact(d);
    }
  }
  const double m = std::min(fc, fd);
  const double at = fc < fd ? c : d;
  if (m <= ftol) {
    zeros.push_back({at, 2});
  } else if (m < grazing_abs) {
    grazing.push_back({at, m});
  }
  return zeros;
}

}  // namespace

Trajectory integrate(const SymbolModel& model, FlowKind kind, const PhasePoint& ic, const Variation& ic_var,
                     double span_end, const ODESettings& cfg, const IntegrateOptions& opts) {
  const AugmentedFlow flow(model, kind);
  Trajectory tr;
  tr.kind = kind;
  const FlowState y0 = pack_state(ic, ic_var, opts.s0, 0.0);
  (void)flow(y0);  // inadmissible initial data is an error even when truncating

  std::string domain_msg;
  const auto rhs = [&](double, const FlowState& y) -> FlowState {
    try {
      return flow(y);
    } catch (const DomainViolation& e) {
      if (y.allFinite() || domain_msg.empty()) domain_msg = e.what();
      return FlowState::Constant(kNaN);
    }
  };

  const auto event_at = [&](const DenseStep<kFlowDim>& st, double u, int mult) {
    const FlowState y = st.eval(u);
    CausticEvent ev;
    ev.tau = kind == FlowKind::physical ? y[9] : u;
    ev.t = kind == FlowKind::physical ? u : y[9];
    ev.x = {y[0], y[1]};
    ev.multiplicity = mult;
    return ev;
  };

  int morse = 0;
  size_t next = 0;
  const auto& at = opts.sample_at;
  if (at.empty()) {
    tr.samples.push_back(flow.sample(0.0, y0, 0));
  } else {
    while (next < at.size() && at[next] <= 0.0) {
      if (at[next] == 0.0) tr.samples.push_back(flow.sample(0.0, y0, 0));
      ++next;
    }
  }
  tr.end = 0.0;
  const double end_slack = 1e-12 * std::max(1.0, std::abs(span_end));

  const auto observer = [&](const DenseStep<kFlowDim>& st) {
    if (opts.keep_dense) tr.dense.push_back(st);
    std::vector<std::pair<double, double>> grazing;
    auto zeros = step_zeros(flow, st, opts.grazing_abs, grazing);
    std::sort(zeros.begin(), zeros.end(), [](const Zero& a, const Zero& b) { return a.at < b.at; });
    for (const auto& [g, jmin] : grazing) {
      tr.grazing.push_back(event_at(st, g, 0));
      tr.grazing.back().J_min = jmin;
    }

    size_t zi = 0;
    const auto count_to = [&](double u) {
      while (zi < zeros.size() && zeros[zi].at <= u) {
        if (zeros[zi].at > opts.morse_start) {
          tr.caustics.push_back(event_at(st, zeros[zi].at, zeros[zi].multiplicity));
          morse += zeros[zi].multiplicity;
        }
        ++zi;
      }
    };
    const bool final_step = st.t1() >= span_end - end_slack;
    if (at.empty()) {
      count_to(st.t1());
      tr.samples.push_back(flow.sample(st.t1(), st.end(), morse));
    } else {
      while (next < at.size() && (at[next] <= st.t1() || (final_step && at[next] <= span_end + end_slack))) {
        count_to(at[next]);
        tr.samples.push_back(flow.sample(at[next], st.eval(at[next]), morse));
        ++next;
      }
    }
    count_to(st.t1());
    tr.end = st.t1();
    return true;
  };

  try {
    integrate_dopri5<kFlowDim>(rhs, 0.0, y0, span_end, cfg, observer);
  } catch (const NonFiniteRhs&) {
    if (domain_msg.empty()) throw;
    if (!opts.truncate_at_exit)
      throw DomainViolation(fmt::format("{} trajectory left the admissible set at parameter {}: {}", to_string(kind),
                                        tr.end, domain_msg));
    tr.truncated = true;
    tr.exit_reason = domain_msg;
  }
  return tr;
}

// --- Time map ------------------------------------------------------------------

double TimeMap::Piece::eval(double t) const {
  const double s = (t - t0) / h;
  const double s1 = 1.0 - s;
  return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
}

double TimeMap::Piece::slope(double t) const {
  const double s = (t - t0) / h;
  const double s1 = 1.0 - s;
  return (r2 + (1.0 - 2.0 * s) * r3 + (2.0 * s * s1 - s * s) * r4 + (2.0 * s * s1 * s1 - 2.0 * s * s * s1) * r5) / h;
}

double TimeMap::tau_of_t(double t) const {
  if (steps_.empty()) return 0.0;
  auto it = std::upper_bound(steps_.begin(), steps_.end(), t, [](double v, const Piece& p) { return v < p.t0; });
  if (it != steps_.begin()) --it;
  return it->eval(std::clamp(t, it->t0, it->t1()));
}

double TimeMap::t_of_tau(double tau) const {
  if (steps_.empty()) return 0.0;
  auto it = std::upper_bound(steps_.begin(), steps_.end(), tau, [](double v, const Piece& p) { return v < p.r1; });
  if (it != steps_.begin()) --it;
  const Piece& pc = *it;
  double lo = pc.t0, hi = pc.t1();
  double t = pc.t0 + (tau - pc.r1) / pc.R0;
  for (int i = 0; i < 60; ++i) {
    if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
    const double f = pc.eval(t) - tau;
    if (f > 0.0)
      hi = t;
    else
      lo = t;
    const double step = f / pc.slope(t);
    t -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(t))) break;
  }
  return std::clamp(t, pc.t0, pc.t1());
}

TimeMap reparametrize(const Trajectory& physical) {
  if (physical.kind != FlowKind::physical) throw Error("reparametrize expects a physical-time trajectory");
  if (physical.dense.empty()) throw Error("reparametrize needs dense output");
  TimeMap map;
  for (const auto& st : physical.dense) {
    TimeMap::Piece pc{st.t0, st.h, st.r1[9], st.r2[9], st.r3[9], st.r4[9], st.r5[9], st.f0[9], st.f1[9]};
    if (!(pc.R0 > 0.0) || !(pc.R1 > 0.0))
      throw DomainViolation(fmt::format("R = {} is not positive at t = {}; tau(t) is not monotone",
                                        std::min(pc.R0, pc.R1), st.t0));
    for (int j = 1; j < 4; ++j)
      if (!(pc.slope(st.t0 + 0.25 * j * st.h) > 0.0))
        throw DomainViolation(fmt::format("tau(t) is not monotone near t = {}", st.t0));
    map.steps_.push_back(pc);
  }
  map.tau_end_ = map.steps_.back().eval(map.steps_.back().t1());
  return map;
}

double verify_correspondence(const SymbolModel& model, const PhasePoint& ic, const Variation& ic_var,
                             double tau_horizon, const ODESettings& cfg) {
  IntegrateOptions opts;
  opts.keep_dense = true;
  const Trajectory fin = integrate(model, FlowKind::finsler, ic, ic_var, tau_horizon, cfg, opts);
  const double t_h = fin.state_at(fin.end)[9];
  if (!(t_h > 0.0)) throw DomainViolation("physical time does not advance along the Finsler flow (R <= 0)");
  const Trajectory phys = integrate(model, FlowKind::physical, ic, ic_var, t_h, cfg, opts);
  const TimeMap map = reparametrize(phys);

  double dev = 0.0;
  const auto probe = [&](double t) {
    const FlowState yp = phys.state_at(t);
    const double tau = std::min(map.tau_of_t(t), fin.end);
    const FlowState yf = fin.state_at(tau);
    dev = std::max(dev, (yp.head<4>() - yf.head<4>()).norm());
  };
  for (const auto& st : phys.dense)
    for (int j = 0; j < 4; ++j) probe(st.t0 + 0.25 * j * st.h);
  probe(phys.end);
  return dev;
}

double compare_tau_flows(const SymbolModel& model, FlowKind a, FlowKind b, const PhasePoint& ic,
                         const Variation& ic_var, double tau_horizon, const ODESettings& cfg) {
  if (a == FlowKind::physical || b == FlowKind::physical) throw Error("compare_tau_flows: tau-parametrized flows only");
  IntegrateOptions opts;
  opts.keep_dense = true;
  const Trajectory ta = integrate(model, a, ic, ic_var, tau_horizon, cfg, opts);
  const Trajectory tb = integrate(model, b, ic, ic_var, tau_horizon, cfg, opts);
  double dev = 0.0;
  const auto probe = [&](double tau) {
    dev = std::max(dev, (ta.state_at(tau).head<4>() - tb.state_at(tau).head<4>()).norm());
  };
  for (const auto& st : ta.dense)
    for (int j = 0; j < 4; ++j) probe(st.t0 + 0.25 * j * st.h);
  probe(std::min(ta.end, tb.end));
  return dev;
}

}  // namespace mjw
