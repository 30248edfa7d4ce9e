#include "mjw/curve.hpp"

#include <boost/math/interpolators/makima.hpp>
#include <fmt/format.h>

#include <array>
#include <cmath>

#include "mjw/errors.hpp"

namespace mjw {

using Makima = boost::math::interpolators::makima<std::vector<double>>;

struct InitialCurve::Spline {
  std::array<Makima, 4> comp;  // x1, x2, p1, p2
};

namespace {

void check_shell(const SymbolModel& model, const Vec2& x, const Vec2& p, const char* what) {
  const double res = model.shell_residual(x, p);
  if (res > 1e-10)
    throw ShellViolation(fmt::format("{} curve is off the energy shell at ({}, {}): |P|C - 1 = {}", what, x.x(),
                                     x.y(), res));
}

// 5-point Gauss-Legendre on [a, b].
template <class Fn>
double gauss5(Fn&& f, double a, double b) {
  static constexpr double xs[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                   0.9061798459386640};
  static constexpr double ws[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                   0.2369268850561891, 0.2369268850561891};
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < 5; ++i) acc += ws[i] * f(c + r * xs[i]);
  return acc * r;
}

}  // namespace

InitialCurve InitialCurve::scattering(const SymbolModel& model, double k, double a, double phi_min, double phi_max) {
  if (!(k > 0.0)) throw ConfigError("scattering curve needs k > 0");
  if (!(phi_max > phi_min)) throw ConfigError("scattering curve needs phi_max > phi_min");
  InitialCurve c;
  c.kind_ = "scattering";
  c.phi_min_ = phi_min;
  c.phi_max_ = phi_max;
  c.k_ = k;
  c.a_line_ = a;
  for (int i = 0; i <= 64; ++i) {
    const double phi = phi_min + (phi_max - phi_min) * i / 64.0;
    check_shell(model, {phi, a}, {0.0, k}, "scattering");
  }
  return c;
}

InitialCurve InitialCurve::green(const SymbolModel& model, double b, const Vec2& a) {
  if (!(b > 0.0)) throw ConfigError("green curve needs b > 0");
  InitialCurve c;
  c.kind_ = "green";
  c.domain_ = CurveDomain::circle;
  c.phi_min_ = 0.0;
  c.phi_max_ = 2.0 * kPi;
  c.b_ = b;
  c.a_point_ = a;
  check_shell(model, a, {b, 0.0}, "green");
  return c;
}

InitialCurve InitialCurve::custom(const SymbolModel& model, std::vector<CurveNode> table) {
  if (table.size() < 4) throw ConfigError("custom curve needs at least four nodes");
  for (size_t i = 1; i < table.size(); ++i)
    if (!(table[i].phi > table[i - 1].phi)) throw ConfigError("custom curve phi values must increase");
  for (const auto& n : table) check_shell(model, n.x, n.p, "custom");
  InitialCurve c;
  c.kind_ = "custom";
  c.phi_min_ = table.front().phi;
  c.phi_max_ = table.back().phi;
  c.table_ = table;
  const auto column = [&](int k) {
    std::vector<double> v;
    for (const auto& n : table) v.push_back(k < 2 ? n.x[k] : n.p[k - 2]);
    return v;
  };
  const auto phis = [&] {
    std::vector<double> v;
    for (const auto& n : table) v.push_back(n.phi);
    return v;
  };
  c.spline_ = std::make_shared<Spline>(Spline{{Makima(phis(), column(0)), Makima(phis(), column(1)),
                                               Makima(phis(), column(2)), Makima(phis(), column(3))}});
  c.s0_nodes_.assign(table.size(), 0.0);
  for (size_t i = 1; i < table.size(); ++i)
    c.s0_nodes_[i] = c.s0_nodes_[i - 1] +
                     gauss5([&](double phi) { return c.s0_prime(phi); }, table[i - 1].phi, table[i].phi);
  return c;
}

double InitialCurve::wrap(double phi) const {
  if (domain_ != CurveDomain::circle) return phi;
  const double period = 2.0 * kPi;
  return phi - period * std::floor(phi / period);
}

PhasePoint InitialCurve::point(double phi) const {
  if (kind_ == "scattering") return {{phi, a_line_}, {0.0, k_}};
  if (kind_ == "green") {
    const double f = wrap(phi);
    return {a_point_, b_ * Vec2(std::cos(f), std::sin(f))};
  }
  const double f = std::clamp(phi, phi_min_, phi_max_);
  const auto& s = spline_->comp;
  return {{s[0](f), s[1](f)}, {s[2](f), s[3](f)}};
}

Variation InitialCurve::variation(double phi) const {
  if (kind_ == "scattering") return {{1.0, 0.0}, {0.0, 0.0}};
  if (kind_ == "green") {
    const double f = wrap(phi);
    return {{0.0, 0.0}, b_ * Vec2(-std::sin(f), std::cos(f))};
  }
  const double f = std::clamp(phi, phi_min_, phi_max_);
  const auto& s = spline_->comp;
  return {{s[0].prime(f), s[1].prime(f)}, {s[2].prime(f), s[3].prime(f)}};
}

double InitialCurve::s0_prime(double phi) const {
  if (kind_ != "custom") return 0.0;
  return point(phi).p.dot(variation(phi).Xphi);
}

double InitialCurve::s0(double phi) const {
  if (kind_ != "custom") return 0.0;
  const double f = std::clamp(phi, phi_min_, phi_max_);
  auto it = std::upper_bound(table_.begin(), table_.end(), f, [](double v, const CurveNode& n) { return v < n.phi; });
  const size_t i = it == table_.begin() ? 0 : static_cast<size_t>(it - table_.begin()) - 1;
  return s0_nodes_[i] + gauss5([&](double u) { return s0_prime(u); }, table_[i].phi, f);
}

std::vector<double> eikonal_s0(const InitialCurve& curve, const std::vector<double>& phis) {
  std::vector<double> out;
  out.reserve(phis.size());
  for (double phi : phis) out.push_back(curve.s0(phi));
  return out;
}

}  // namespace mjw
