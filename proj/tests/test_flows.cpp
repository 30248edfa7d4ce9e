#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mjw/errors.hpp"
#include "mjw/flows.hpp"

using namespace mjw;
using doctest::Approx;

namespace {

ScalarField2D bump_potential() { return ScalarField2D::parse("product(smoothstep(x2, 0, 1), gaussian(5, 3, 1, 1, 1))"); }

ScalarField2D gaussian_depth() {
  return ScalarField2D::constant(1.0) + ScalarField2D::gaussian({1.0, 2.0}, {1.0, 1.2}, -0.4);
}

ODESettings tight() {
  ODESettings s;
  s.rel_tol = 1e-10;
  s.abs_tol = 1e-12;
  return s;
}

PhasePoint on_shell(const SymbolModel& m, const Vec2& x, double angle) {
  return {x, Vec2(std::cos(angle), std::sin(angle)) / m.dispersion_C(x)};
}

}  // namespace

TEST_CASE("physical right-hand side") {
  const auto free = SymbolModel::schrodinger(2.0, ScalarField2D());
  auto v = rhs_physical(free, {{0, 0}, {0, 2}});
  CHECK(v.dx.x() == Approx(0.0));
  CHECK(v.dx.y() == Approx(2.0));
  CHECK(v.dp.norm() == 0.0);

  const auto U = ScalarField2D::gaussian({0.5, 0.5}, {1, 1}, 0.4);
  const auto sch = SymbolModel::schrodinger(2.0, U);
  const Vec2 x(0.1, 0.9);
  v = rhs_physical(sch, on_shell(sch, x, 0.7));
  CHECK(v.dp.x() == Approx(-U.gradient(x).x()));
  CHECK(v.dp.y() == Approx(-U.gradient(x).y()));

  const auto gr = SymbolModel::graphene(2.0, ScalarField2D(), ScalarField2D::constant(1.0), 1);
  v = rhs_physical(gr, {{0, 0}, {std::sqrt(3.0), 0}});
  CHECK(v.dx.x() == Approx(std::sqrt(3.0) / 2));
  CHECK(v.dx.y() == Approx(0.0));
}

TEST_CASE("Finsler right-hand side") {
  const auto free = SymbolModel::schrodinger(2.0, ScalarField2D());
  auto v = rhs_finsler(free, {{0, 0}, {0, 2}});
  CHECK(v.dx.y() == Approx(0.5));
  CHECK(v.dp.norm() == 0.0);

  const auto ww = SymbolModel::waterwave(1.0, ScalarField2D::constant(1.0));
  const PhasePoint q = on_shell(ww, {0.3, 0.3}, 1.1);
  v = rhs_finsler(ww, q);
  const Vec2 expect = q.p / q.p.squaredNorm();
  CHECK(v.dx.x() == Approx(expect.x()).epsilon(1e-14));
  CHECK(v.dx.y() == Approx(expect.y()).epsilon(1e-14));
  CHECK(v.dp.norm() <= 1e-15);

  const auto bump = SymbolModel::helmholtz(2.0, bump_potential());
  const Vec2 x(4.5, 2.0);
  v = rhs_finsler(bump, on_shell(bump, x, 0.4));
  CHECK(v.dx.norm() == Approx(bump.dispersion_C(x)));
}

TEST_CASE("reduced water-wave systems match the Finsler flow") {
  const double E = 1.2;
  const auto D = gaussian_depth();
  const auto ww = SymbolModel::waterwave(E, D);
  for (const Vec2 x : {Vec2(0.5, 1.5), Vec2(1.3, 2.4), Vec2(-0.5, 0.0)}) {
    const PhasePoint q = on_shell(ww, x, 0.8);
    const auto a = rhs_waterwave_reduced(D, E, q);
    const auto b = rhs_finsler(ww, q);
    CHECK((a.dx - b.dx).norm() <= 1e-8 * b.dx.norm());
    CHECK((a.dp - b.dp).norm() <= 1e-8 * std::max(b.dp.norm(), 1e-3));
  }
  const auto flat = ScalarField2D::constant(0.8);
  CHECK(rhs_waterwave_reduced(flat, E, on_shell(SymbolModel::waterwave(E, flat), {0, 0}, 0.1)).dp.norm() == 0.0);
  CHECK_THROWS_AS(rhs_waterwave_reduced(D, E, {{0.5, 1.5}, {3.0, 0.0}}), ShellViolation);

  const auto mu = ScalarField2D::constant(1.0);
  const auto wt = SymbolModel::waterwave_tension(E, D, mu);
  for (const Vec2 x : {Vec2(0.5, 1.5), Vec2(1.3, 2.4)}) {
    const PhasePoint q = on_shell(wt, x, -0.4);
    const auto a = rhs_tension_reduced(D, mu, E, q);
    const auto b = rhs_finsler(wt, q);
    CHECK((a.dx - b.dx).norm() <= 1e-8 * b.dx.norm());
    CHECK((a.dp - b.dp).norm() <= 1e-8 * std::max(b.dp.norm(), 1e-3));

    // The root-free gradient equals the implicit derivative of the root.
    const double d = D.value(x);
    const Vec2 dE = E * D.gradient(x) / (2 * std::sqrt(d));
    const Vec2 g = dY_tension(E * std::sqrt(d), E, dE, Vec2::Zero());
    const Vec2 h = tension_grad_Y_onshell(D, mu, E, q);
    CHECK((g - h).norm() <= 1e-10 * g.norm());
  }
  const auto mu_flat = ScalarField2D::constant(0.3);
  CHECK(rhs_tension_reduced(flat, mu_flat, E, on_shell(SymbolModel::waterwave_tension(E, flat, mu_flat), {0, 0}, 2.0))
            .dp.norm() == 0.0);

  // Vanishing tension degenerates to the plain water-wave system.
  const auto mu0 = ScalarField2D::constant(0.0);
  const PhasePoint q = on_shell(ww, {0.7, 1.9}, 0.3);
  const auto a = rhs_tension_reduced(D, mu0, E, q);
  const auto b = rhs_waterwave_reduced(D, E, q);
  CHECK((a.dp - b.dp).norm() <= 1e-10 * b.dp.norm());
}

TEST_CASE("free Finsler flow from a scattering line") {
  const auto free = SymbolModel::schrodinger(2.0, ScalarField2D());
  const double phi = 1.3;
  IntegrateOptions opts;
  opts.sample_at = {0.0, 1.0, 2.5, 6.0};
  const auto tr = integrate(free, FlowKind::finsler, {{phi, 0}, {0, 2}}, {{1, 0}, {0, 0}}, 6.0, tight(), opts);
  REQUIRE(tr.samples.size() == 4);
  for (const auto& s : tr.samples) {
    CHECK(s.point.x.x() == Approx(phi));
    CHECK(s.point.x.y() == Approx(s.tau / 2).epsilon(1e-12));
    CHECK(s.s == Approx(s.tau).epsilon(1e-12).scale(1e-12));
    CHECK(s.t == Approx(s.tau / 4).epsilon(1e-12).scale(1e-12));
    CHECK(s.J == Approx(-0.5));
    CHECK(s.morse == 0);
  }
  CHECK(tr.caustics.empty());
}

TEST_CASE("time reparametrization") {
  IntegrateOptions opts;
  opts.keep_dense = true;
  const auto free = SymbolModel::schrodinger(2.0, ScalarField2D());
  auto tr = integrate(free, FlowKind::physical, {{0, 0}, {0, 2}}, {}, 2.0, tight(), opts);
  auto map = reparametrize(tr);
  CHECK(map.tau_of_t(1.25) == Approx(5.0));
  CHECK(map.t_of_tau(5.0) == Approx(1.25));

  const auto gr = SymbolModel::graphene(2.0, ScalarField2D(), ScalarField2D::constant(1.0), 1);
  tr = integrate(gr, FlowKind::physical, {{0, 0}, {std::sqrt(3.0), 0}}, {}, 3.0, tight(), opts);
  map = reparametrize(tr);
  CHECK(map.tau_of_t(2.0) == Approx(3.0));

  // Ray through the bump: dtau/dt = E - U along the ray.
  const auto bump = SymbolModel::helmholtz(2.0, bump_potential());
  tr = integrate(bump, FlowKind::physical, {{4.6, 0}, {0, 2}}, {{1, 0}, {0, 0}}, 8.0, tight(), opts);
  map = reparametrize(tr);
  for (double t : {0.5, 1.7, 3.1, 4.4, 6.0}) {
    const FlowState y = tr.state_at(t);
    const double h = 1e-5;
    const double slope = (map.tau_of_t(t + h) - map.tau_of_t(t - h)) / (2 * h);
    CHECK(slope == Approx(2.0 - bump_potential().value({y[0], y[1]})).epsilon(1e-8));
    CHECK(map.t_of_tau(map.tau_of_t(t)) == Approx(t).epsilon(1e-12));
  }

  // The lower graphene branch has R < 0: no monotone time change.
  const auto lower = SymbolModel::graphene(-2.0, ScalarField2D(), ScalarField2D::constant(1.0), -1);
  tr = integrate(lower, FlowKind::physical, on_shell(lower, {0, 0}, 0.0), {}, 1.0, tight(), opts);
  CHECK_THROWS_AS(reparametrize(tr), DomainViolation);
}

TEST_CASE("Maupertuis-Jacobi correspondence") {
  const auto free = SymbolModel::schrodinger(2.0, ScalarField2D());
  CHECK(verify_correspondence(free, {{0.2, 0}, {0, 2}}, {{1, 0}, {0, 0}}, 5.0, tight()) <= 1e-10);

  const auto bump = SymbolModel::helmholtz(2.0, bump_potential());
  for (double phi : {3.5, 4.6, 5.0, 6.2}) {
    INFO("phi = " << phi);
    CHECK(verify_correspondence(bump, {{phi, 0}, {0, 2}}, {{1, 0}, {0, 0}}, 12.0, tight()) <= 1e-6);
  }

  const double E = 1.2;
  const auto D = gaussian_depth();
  const auto ww = SymbolModel::waterwave(E, D);
  const PhasePoint q = on_shell(ww, {0.0, 0.5}, 0.6);
  CHECK(compare_tau_flows(ww, FlowKind::finsler, FlowKind::reduced, q, {}, 5.0, tight()) <= 1e-6);
  const auto wt = SymbolModel::waterwave_tension(E, D, ScalarField2D::constant(0.5));
  const PhasePoint qt = on_shell(wt, {0.0, 0.5}, 0.6);
  CHECK(compare_tau_flows(wt, FlowKind::finsler, FlowKind::reduced, qt, {}, 5.0, tight()) <= 1e-6);
}

TEST_CASE("trajectory invariants over the bump") {
  const auto bump = SymbolModel::helmholtz(2.0, bump_potential());
  const auto tr = integrate(bump, FlowKind::finsler, {{5.0, 0}, {0, 2}}, {{1, 0}, {0, 0}}, 12.0, ODESettings{});
  double shell = 0, abs_j = 0, chain = 0, eik = 0;
  for (const auto& s : tr.samples) {
    const double C = bump.dispersion_C(s.point.x);
    const double R = bump.factor_R(s.point.x);
    shell = std::max(shell, bump.shell_residual(s.point.x, s.point.p));
    abs_j = std::max(abs_j, std::abs(std::abs(s.J) - C * s.var.Xphi.norm()) / (C * s.var.Xphi.norm()));
    chain = std::max(chain, std::abs(s.J_phys / s.J - R) / R);
    eik = std::max(eik, std::abs(s.s - s.tau));
  }
  CHECK(shell <= 1e-8);
  CHECK(abs_j <= 1e-6);
  CHECK(chain <= 1e-6);
  CHECK(eik <= 1e-8);
  // The central ray is deflected by the bump but stays symmetric.
  CHECK(tr.samples.back().point.x.x() == Approx(5.0));
}

TEST_CASE("variational equations match neighbouring rays") {
  const auto bump = SymbolModel::helmholtz(2.0, bump_potential());
  IntegrateOptions opts;
  opts.sample_at = {3.0, 6.0, 9.0, 12.0};
  const auto ray = [&](double phi) {
    return integrate(bump, FlowKind::finsler, {{phi, 0}, {0, 2}}, {{1, 0}, {0, 0}}, 12.0, tight(), opts);
  };
  const double phi = 4.3, d = 1e-4;
  const auto c = ray(phi), l = ray(phi - d), r = ray(phi + d);
  for (size_t i = 0; i < c.samples.size(); ++i) {
    const Vec2 fd = (r.samples[i].point.x - l.samples[i].point.x) / (2 * d);
    const Vec2 fp = (r.samples[i].point.p - l.samples[i].point.p) / (2 * d);
    CHECK((c.samples[i].var.Xphi - fd).norm() <= 1e-4 * std::max(1.0, fd.norm()));
    CHECK((c.samples[i].var.Pphi - fp).norm() <= 1e-4 * std::max(1.0, fp.norm()));
  }
}

TEST_CASE("conservation on all models") {
  const double E = 1.2;
  const auto D = gaussian_depth();
  const std::vector<SymbolModel> models{
      SymbolModel::schrodinger(2.0, ScalarField2D::gaussian({1, 1}, {1, 1}, 0.5)),
      SymbolModel::helmholtz(2.0, bump_potential()),
      SymbolModel::graphene(2.0, ScalarField2D::gaussian({1, 1}, {1, 1}, 0.3), ScalarField2D::constant(0.5), 1),
      SymbolModel::graphene(-2.0, ScalarField2D::gaussian({1, 1}, {1, 1}, 0.3), ScalarField2D::constant(0.5), -1),
      SymbolModel::waterwave(E, D),
      SymbolModel::waterwave_tension(E, D, ScalarField2D::constant(0.5)),
  };
  for (const auto& m : models) {
    INFO(to_string(m.kind()) << " branch " << m.branch());
    const PhasePoint q = on_shell(m, {0.0, 0.2}, 0.9);
    for (FlowKind k : {FlowKind::physical, FlowKind::finsler}) {
      const auto tr = integrate(m, k, q, {}, 1.0, tight());
      double drift = 0.0;
      for (const auto& s : tr.samples) {
        const double h = k == FlowKind::physical ? m.physical_hamiltonian(s.point.x, s.point.p).v
                                                 : m.finsler_hamiltonian(s.point.x, s.point.p).v;
        drift = std::max(drift, std::abs(h));
      }
      CHECK(drift <= 1e-8);
    }
  }
}

TEST_CASE("domain exit") {
  const auto wall = SymbolModel::schrodinger(1.0, ScalarField2D::gaussian({0, 3}, {1, 1}, 2.0));
  const PhasePoint q{{0, 0}, {0, std::sqrt(2.0 * (1.0 - wall.U().value({0, 0})))}};
  CHECK_THROWS_AS(integrate(wall, FlowKind::finsler, q, {}, 10.0, tight()), DomainViolation);
  IntegrateOptions opts;
  opts.truncate_at_exit = true;
  const auto tr = integrate(wall, FlowKind::finsler, q, {}, 10.0, tight(), opts);
  CHECK(tr.truncated);
  CHECK(tr.end < 10.0);
  CHECK(!tr.exit_reason.empty());
  // The turning point is where U = E.
  const double y = tr.samples.back().point.x.y();
  CHECK(wall.U().value({0, y}) == Approx(1.0).epsilon(1e-3));
}

TEST_CASE("focus of a point source in the fish-eye medium") {
  // n = 2/(1 + r^2): every ray from (1, 0) refocuses at (-1, 0) after optical length pi.
  const auto eye = SymbolModel::helmholtz(2.0, ScalarField2D::parse("sum(2, lorentzian(0, 0, -2, 1))"));
  for (double phi : {0.7, 2.0, 3.5, 5.1}) {
    const PhasePoint q{{1, 0}, {std::cos(phi), std::sin(phi)}};
    const Variation v{{0, 0}, {-std::sin(phi), std::cos(phi)}};
    IntegrateOptions opts;
    opts.morse_start = 1e-6;
    const auto tr = integrate(eye, FlowKind::finsler, q, v, 4.5, tight(), opts);
    REQUIRE(tr.caustics.size() == 1);
    CHECK(tr.caustics[0].tau == Approx(kPi).epsilon(1e-8));
    CHECK((tr.caustics[0].x - Vec2(-1, 0)).norm() <= 1e-7);
    CHECK(tr.samples.back().morse == 1);
  }
}
