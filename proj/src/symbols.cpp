#include "mjw/symbols.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "mjw/errors.hpp"

namespace mjw {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::schrodinger: return "schrodinger";
    case ModelKind::helmholtz: return "helmholtz";
    case ModelKind::graphene: return "graphene";
    case ModelKind::waterwave: return "waterwave";
    case ModelKind::waterwave_tension: return "waterwave_tension";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "schrodinger") return ModelKind::schrodinger;
  if (name == "helmholtz") return ModelKind::helmholtz;
  if (name == "graphene") return ModelKind::graphene;
  if (name == "waterwave") return ModelKind::waterwave;
  if (name == "waterwave_tension") return ModelKind::waterwave_tension;
  throw ConfigError("unknown model kind '" + name + "'");
}

namespace {

// Safeguarded Newton on an increasing function with a sign-changing bracket
// [lo, hi]; falls back to bisection whenever the Newton iterate leaves the
// bracket or fails to shrink it fast enough.
template <class Fn>
double increasing_root(Fn&& fn, double lo, double hi, double guess) {
  double y = (guess > lo && guess < hi) ? guess : 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    auto [f, df] = fn(y);
    if (f == 0.0) return y;
    if (f < 0.0)
      lo = y;
    else
      hi = y;
    double next = y - f / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - y);
    y = next;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(y) || hi - lo <= 0.0) break;
  }
  return y;
}

double sech2(double y) {
  const double t = std::tanh(y);
  return 1.0 - t * t;
}

}  // namespace

double solve_Y(double calE) {
  if (!(calE > 0.0)) throw DomainViolation(fmt::format("solve_Y: calE = {} must be positive", calE));
  const double e2 = calE * calE;
  // y tanh y <= min(y, y^2) gives the lower bound; tanh y >= tanh 1 for y >= 1
  // gives the upper bound.
  const double lo = 0.5 * std::max(calE, e2);
  const double hi = 2.0 * std::max(e2, 1.0);
  const double guess = e2 > 4.0 ? e2 : std::max(calE, e2);
  return increasing_root(
      [e2](double y) {
        const double t = std::tanh(y);
        return std::pair{y * t - e2, t + y * (1.0 - t * t)};
      },
      lo, hi, guess);
}

double dY(double calE) {
  const double y = solve_Y(calE);
  // Y^2 + calE^2 - calE^4 written as Y^2 sech^2 Y + calE^2 to avoid the
  // cancellation between Y^2 and calE^4 in deep water.
  return 2.0 * y * calE / (y * y * sech2(y) + calE * calE);
}

TensionPartials tension_partials(double y, double calE, double nu) {
  const double e2 = calE * calE, e4 = e2 * e2;
  const double nu4 = nu * nu * nu * nu;
  const double q = e4 + y * y * nu4;
  const double t = std::tanh(y);
  TensionPartials d;
  d.f = y * t - e4 * e2 / q;
  d.fy = t + y * (1.0 - t * t) + 2.0 * y * nu4 * e4 * e2 / (q * q);
  d.fE = -(2.0 * e4 * e4 * calE + 6.0 * e4 * calE * y * y * nu4) / (q * q);
  d.fnu = e4 * e2 * 4.0 * y * y * nu * nu * nu / (q * q);
  return d;
}

double solve_Y_tension(double calE, double nu) {
  if (!(calE > 0.0) || !(nu >= 0.0))
    throw DomainViolation(fmt::format("solve_Y_tension: need calE > 0, nu >= 0 (got {}, {})", calE, nu));
  const double hi = solve_Y(calE);
  if (nu == 0.0) return hi;
  return increasing_root(
      [&](double y) {
        auto d = tension_partials(y, calE, nu);
        return std::pair{d.f, d.fy};
      },
      0.0, hi * (1.0 + 1e-15), hi);
}

Vec2 dY_tension(double calE, double nu, const Vec2& dcalE_dx, const Vec2& dnu_dx) {
  const double y = solve_Y_tension(calE, nu);
  auto d = tension_partials(y, calE, nu);
  return -(d.fE * dcalE_dx + d.fnu * dnu_dx) / d.fy;
}

// --- SymbolModel -------------------------------------------------------------

SymbolModel SymbolModel::schrodinger(double E, ScalarField2D U) {
  SymbolModel m(ModelKind::schrodinger, E);
  m.U_ = std::move(U);
  return m;
}

SymbolModel SymbolModel::helmholtz(double E, ScalarField2D U) {
  SymbolModel m(ModelKind::helmholtz, E);
  m.U_ = std::move(U);
  return m;
}

SymbolModel SymbolModel::graphene(double E, ScalarField2D U, ScalarField2D mass, int branch) {
  if (branch != 1 && branch != -1) throw ConfigError("graphene branch must be +1 or -1");
  SymbolModel m(ModelKind::graphene, E);
  m.U_ = std::move(U);
  m.m_ = std::move(mass);
  m.branch_ = branch;
  return m;
}

SymbolModel SymbolModel::waterwave(double E, ScalarField2D D) {
  if (!(E > 0.0)) throw ConfigError("waterwave energy must be positive");
  SymbolModel m(ModelKind::waterwave, E);
  m.D_ = std::move(D);
  return m;
}

SymbolModel SymbolModel::waterwave_tension(double E, ScalarField2D D, ScalarField2D mu) {
  if (!(E > 0.0)) throw ConfigError("waterwave energy must be positive");
  SymbolModel m(ModelKind::waterwave_tension, E);
  m.D_ = std::move(D);
  m.mu_ = std::move(mu);
  return m;
}

namespace {

// F(x, z) in terms of the local field values; T is double or a jet type.
template <class T>
T F_expr(ModelKind kind, int branch, const T& z, const T& U, const T& m, const T& D, const T& mu) {
  using std::sqrt;
  using std::tanh;
  switch (kind) {
    case ModelKind::schrodinger: return 0.5 * z * z + U;
    case ModelKind::helmholtz: return z + U;
    case ModelKind::graphene: return U + double(branch) * sqrt(z * z + m * m);
    case ModelKind::waterwave: return sqrt(z * tanh(z * D));
    case ModelKind::waterwave_tension: return sqrt(z * tanh(z * D) * (1.0 + mu * z * z));
  }
  return T(0.0);
}

// Implicit water-wave root as a jet: two Newton steps from the converged
// double-precision root make value, gradient and Hessian exact.
template <class T>
T waterwave_root_jet(double y0, const T& E2D) {
  using std::tanh;
  T y(y0);
  for (int i = 0; i < 2; ++i) {
    T t = tanh(y);
    T f = y * t - E2D;
    T df = t + y * (1.0 - t * t);
    y = y - f / df;
  }
  return y;
}

template <class T>
T tension_root_jet(double y0, double E, const T& D, const T& mu) {
  using std::tanh;
  T y(y0);
  const double E2 = E * E;
  for (int i = 0; i < 2; ++i) {
    T t = tanh(y);
    T q = D * D + y * y * mu;
    T f = y * t - E2 * D * D * D / q;
    T df = t + y * (1.0 - t * t) + 2.0 * E2 * y * mu * D * D * D / (q * q);
    y = y - f / df;
  }
  return y;
}

}  // namespace

void SymbolModel::check_fields_at(const Vec2& x) const {
  if (!std::isfinite(x.x()) || !std::isfinite(x.y()))
    throw DomainViolation("non-finite position");
  if (kind_ == ModelKind::waterwave || kind_ == ModelKind::waterwave_tension) {
    const double d = D_.value(x);
    if (!(d > eps_dom_)) throw DomainViolation(fmt::format("depth D = {} not positive at ({}, {})", d, x.x(), x.y()));
    if (kind_ == ModelKind::waterwave_tension && !(mu_.value(x) >= 0.0))
      throw DomainViolation(fmt::format("surface tension negative at ({}, {})", x.x(), x.y()));
  }
}

double SymbolModel::eval_F(const Vec2& x, double z) const {
  if (!(z >= 0.0)) throw DomainViolation("eval_F: z must be non-negative");
  check_fields_at(x);
  return F_expr<double>(kind_, branch_, z, U_.value(x), m_.value(x), D_.value(x), mu_.value(x));
}

double SymbolModel::dF_dz(const Vec2& x, double z) const {
  check_fields_at(x);
  switch (kind_) {
    case ModelKind::schrodinger: return z;
    case ModelKind::helmholtz: return 1.0;
    case ModelKind::graphene: {
      const double m = m_.value(x);
      return branch_ * z / std::sqrt(z * z + m * m);
    }
    case ModelKind::waterwave: {
      const double d = D_.value(x);
      const double y = z * d;
      return (std::tanh(y) + y * sech2(y)) / (2.0 * std::sqrt(z * std::tanh(y)));
    }
    case ModelKind::waterwave_tension: {
      const double d = D_.value(x), mu = mu_.value(x);
      const double y = z * d, t = std::tanh(y);
      const double F2 = z * t * (1.0 + mu * z * z);
      return ((t + y * sech2(y)) * (1.0 + mu * z * z) + 2.0 * mu * z * z * t) / (2.0 * std::sqrt(F2));
    }
  }
  return 0.0;
}

DispersionScratch SymbolModel::dispersion(const Vec2& x) const {
  if (kind_ != ModelKind::waterwave && kind_ != ModelKind::waterwave_tension)
    throw ConfigError("dispersion(): water-wave models only");
  check_fields_at(x);
  DispersionScratch s;
  const double d = D_.value(x);
  s.energy = E_ * std::sqrt(d);
  if (kind_ == ModelKind::waterwave) {
    s.y = solve_Y(s.energy);
  } else {
    s.nu = E_ * std::pow(mu_.value(x), 0.25);
    s.y = solve_Y_tension(s.energy, s.nu);
  }
  return s;
}

Jet2 SymbolModel::dispersion_C_jet(const Vec2& x) const {
  check_fields_at(x);
  const auto where = [&] { return fmt::format("({}, {})", x.x(), x.y()); };
  switch (kind_) {
    case ModelKind::schrodinger: {
      const Jet2 gap = E_ - U_.jet(x);
      if (!(gap.v > eps_dom_)) throw DomainViolation("turning point: E - U <= eps at " + where());
      return 1.0 / sqrt(2.0 * gap);
    }
    case ModelKind::helmholtz: {
      const Jet2 gap = E_ - U_.jet(x);
      if (!(gap.v > eps_dom_)) throw DomainViolation("forbidden region: E - U <= eps at " + where());
      return 1.0 / gap;
    }
    case ModelKind::graphene: {
      const Jet2 gap = E_ - U_.jet(x);
      const Jet2 m = m_.jet(x);
      const Jet2 disc = square(gap) - square(m);
      if (!(branch_ * gap.v > 0.0) || !(disc.v > eps_dom_))
        throw DomainViolation(fmt::format("graphene branch {}: (E-U)^2 - m^2 = {} (E-U = {}) at {}",
                                          branch_ > 0 ? "+" : "-", disc.v, gap.v, where()));
      return 1.0 / sqrt(disc);
    }
    case ModelKind::waterwave: {
      const Jet2 D = D_.jet(x);
      const double y0 = solve_Y(E_ * std::sqrt(D.v));
      return D / waterwave_root_jet(y0, E_ * E_ * D);
    }
    case ModelKind::waterwave_tension: {
      const Jet2 D = D_.jet(x);
      const Jet2 mu = mu_.jet(x);
      const double y0 = solve_Y_tension(E_ * std::sqrt(D.v), E_ * std::pow(mu.v, 0.25));
      return D / tension_root_jet(y0, E_, D, mu);
    }
  }
  return Jet2(0.0);
}

double SymbolModel::dispersion_C(const Vec2& x) const { return dispersion_C_jet(x).v; }

Vec2 SymbolModel::grad_C(const Vec2& x) const {
  const Jet2 c = dispersion_C_jet(x);
  return {c.g[0], c.g[1]};
}

double SymbolModel::factor_R(const Vec2& x) const {
  const double C = dispersion_C(x);
  const double z = 1.0 / C;
  switch (kind_) {
    case ModelKind::schrodinger: return 2.0 * (E_ - U_.value(x));
    case ModelKind::helmholtz: return E_ - U_.value(x);
    case ModelKind::graphene: {
      const double gap = E_ - U_.value(x), m = m_.value(x);
      return (gap * gap - m * m) / gap;
    }
    case ModelKind::waterwave: {
      const double D = D_.value(x);
      const double y = z * D;
      return (y * y - D * D * E_ * E_ * E_ * E_ + D * E_ * E_) / (2.0 * D * E_);
    }
    case ModelKind::waterwave_tension: return z * dF_dz(x, z);
  }
  return 0.0;
}

double SymbolModel::factor_R_onshell_unchecked(const Vec2& x, const Vec2& p) const {
  const double z = p.norm();
  switch (kind_) {
    case ModelKind::waterwave: {
      const double D = D_.value(x);
      const double E2 = E_ * E_;
      return (D * z * z - D * E2 * E2 + E2) / (2.0 * E_);
    }
    case ModelKind::waterwave_tension: {
      const double D = D_.value(x), mu = mu_.value(x);
      const double y = z * D, t = std::tanh(y);
      return z / (2.0 * E_) * ((t + y * sech2(y)) * (1.0 + mu * z * z) + 2.0 * mu * z * z * t);
    }
    default: return factor_R(x);
  }
}

double SymbolModel::factor_R_onshell(const Vec2& x, const Vec2& p) const {
  const double res = shell_residual(x, p);
  if (res > 1e-6)
    throw ShellViolation(fmt::format("factor_R_onshell: |C|p| - 1| = {} at ({}, {})", res, x.x(), x.y()));
  return factor_R_onshell_unchecked(x, p);
}

double SymbolModel::shell_residual(const Vec2& x, const Vec2& p) const {
  return std::abs(dispersion_C(x) * p.norm() - 1.0);
}

Jet4 SymbolModel::physical_hamiltonian(const Vec2& x, const Vec2& p) const {
  check_fields_at(x);
  const Jet4 p1 = Jet4::variable(p.x(), 2), p2 = Jet4::variable(p.y(), 3);
  const Jet4 z = sqrt(p1 * p1 + p2 * p2);
  const auto lifted = [&](const ScalarField2D& f) { return lift<4>(f.jet(x)); };
  const Jet4 zero(0.0);
  const bool ww = kind_ == ModelKind::waterwave || kind_ == ModelKind::waterwave_tension;
  const Jet4 U = ww ? zero : lifted(U_);
  const Jet4 m = kind_ == ModelKind::graphene ? lifted(m_) : zero;
  const Jet4 D = ww ? lifted(D_) : zero;
  const Jet4 mu = kind_ == ModelKind::waterwave_tension ? lifted(mu_) : zero;
  return F_expr<Jet4>(kind_, branch_, z, U, m, D, mu) - E_;
}

Jet4 SymbolModel::finsler_hamiltonian(const Vec2& x, const Vec2& p) const {
  const Jet4 C = lift<4>(dispersion_C_jet(x));
  const Jet4 p1 = Jet4::variable(p.x(), 2), p2 = Jet4::variable(p.y(), 3);
  return C * sqrt(p1 * p1 + p2 * p2) - 1.0;
}

}  // namespace mjw
