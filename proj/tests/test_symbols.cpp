#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mjw/errors.hpp"
#include "mjw/symbols.hpp"

using namespace mjw;
using doctest::Approx;

namespace {

// Reference values from 40-digit bisection of y tanh y = calE^2 and of the
// surface-tension relation.
constexpr double kY1 = 1.1996786402577338;
constexpr double kdY1 = 1.6671131192019294;
constexpr double kYt11 = 0.8459853900155407;
constexpr double kYt105 = 1.1373067004272165;
constexpr double kC_ww = 0.8335565596009647;
constexpr double kR_ww = 0.7196144199453226;

ScalarField2D bump(double amp) { return ScalarField2D::gaussian({0.3, -0.2}, {1.0, 1.5}, amp); }

std::vector<SymbolModel> test_models() {
  return {
      SymbolModel::schrodinger(2.0, bump(0.5)),
      SymbolModel::helmholtz(2.0, bump(0.5)),
      SymbolModel::graphene(2.0, bump(0.3), ScalarField2D::constant(0.5) + bump(0.2), 1),
      SymbolModel::graphene(-2.0, bump(0.3), ScalarField2D::constant(0.5), -1),
      SymbolModel::waterwave(1.0, ScalarField2D::constant(1.0) + bump(0.5)),
      SymbolModel::waterwave_tension(1.0, ScalarField2D::constant(1.0) + bump(0.5),
                                     ScalarField2D::constant(0.2) + bump(0.1)),
  };
}

}  // namespace

TEST_CASE("field expressions parse, print and differentiate") {
  const auto f = ScalarField2D::parse("product(smoothstep(x2, 0, 1), gaussian(5, 3, 1, 1, 1))");
  CHECK(ScalarField2D::parse(f.to_string()).to_string() == f.to_string());
  CHECK(f.value({5.0, -1.0}) == 0.0);
  CHECK(f.value({5.0, 3.0}) == Approx(1.0));
  const auto g = ScalarField2D::parse("sum(0.5, lorentzian(1, 2, 3, 0.5), quadratic(0, 0, 0.25))");
  CHECK(g.value({0.0, 0.0}) == Approx(0.5 + 3.0 / (1.0 + 5.0 / 0.25)));
  CHECK_THROWS_AS(ScalarField2D::parse("gaussian(1, 2)"), ConfigError);
  CHECK_THROWS_AS(ScalarField2D::parse("wobble(1)"), ConfigError);
  CHECK_THROWS_AS(ScalarField2D::parse("const(1) junk"), ConfigError);

  const double d = 1e-5;
  for (const Vec2 x : {Vec2(4.2, 0.4), Vec2(5.5, 2.5), Vec2(0.3, 1.7)}) {
    for (const auto& h : {f, g}) {
      const Vec2 grad = h.gradient(x);
      const Jet2 j = h.jet(x);
      for (int k = 0; k < 2; ++k) {
        Vec2 e = Vec2::Zero();
        e[k] = d;
        const double fd = (h.value(x + e) - h.value(x - e)) / (2 * d);
        CHECK(grad[k] == Approx(fd).epsilon(1e-5).scale(1e-6));
        const Vec2 gfd = (h.gradient(x + e) - h.gradient(x - e)) / (2 * d);
        CHECK(j.hess(k, 0) == Approx(gfd[0]).epsilon(1e-5).scale(1e-6));
        CHECK(j.hess(k, 1) == Approx(gfd[1]).epsilon(1e-5).scale(1e-6));
      }
    }
  }
}

TEST_CASE("eval_F closed forms") {
  const auto zero = ScalarField2D::constant(0.0);
  const auto one = ScalarField2D::constant(1.0);
  CHECK(SymbolModel::schrodinger(2.0, zero).eval_F({0, 0}, 2.0) == Approx(2.0));
  CHECK(SymbolModel::graphene(2.0, zero, one, 1).eval_F({0, 0}, 0.0) == Approx(1.0));
  CHECK(SymbolModel::waterwave(1.0, one).eval_F({0, 0}, kY1) == Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(SymbolModel::helmholtz(2.0, zero).eval_F({0, 0}, -1.0), DomainViolation);
}

TEST_CASE("dispersion_C and factor_R reference values") {
  const auto zero = ScalarField2D::constant(0.0);
  const auto one = ScalarField2D::constant(1.0);
  const Vec2 x(0.7, -1.3);
  CHECK(SymbolModel::schrodinger(2.0, zero).dispersion_C(x) == Approx(0.5));
  CHECK(SymbolModel::helmholtz(2.0, zero).dispersion_C(x) == Approx(0.5));
  CHECK(SymbolModel::waterwave(1.0, one).dispersion_C(x) == Approx(kC_ww).epsilon(1e-14));

  CHECK(SymbolModel::schrodinger(2.0, zero).factor_R(x) == Approx(4.0));
  CHECK(SymbolModel::helmholtz(2.0, zero).factor_R(x) == Approx(2.0));
  CHECK(SymbolModel::graphene(2.0, zero, one, 1).factor_R(x) == Approx(1.5));
  const auto ww = SymbolModel::waterwave(1.0, one);
  CHECK(ww.factor_R(x) == Approx(kR_ww).epsilon(1e-14));
  // z dF/dz at z = 1/C by differentiation of F.
  CHECK(ww.factor_R(x) == Approx(kY1 * ww.dF_dz(x, kY1)).epsilon(1e-12));
}

TEST_CASE("domain violations are reported") {
  const auto bumpy = ScalarField2D::gaussian({0, 0}, {1, 1}, 3.0);
  CHECK_THROWS_AS(SymbolModel::schrodinger(2.0, bumpy).dispersion_C({0, 0}), DomainViolation);
  CHECK_THROWS_AS(SymbolModel::helmholtz(2.0, bumpy).factor_R({0, 0}), DomainViolation);
  CHECK_THROWS_AS(
      SymbolModel::graphene(2.0, ScalarField2D::constant(0.0), ScalarField2D::constant(2.5), 1).dispersion_C({0, 0}),
      DomainViolation);
  CHECK_THROWS_AS(SymbolModel::graphene(2.0, ScalarField2D::constant(0.0), ScalarField2D::constant(1.0), -1)
                      .dispersion_C({0, 0}),
                  DomainViolation);
  CHECK_THROWS_AS(SymbolModel::waterwave(1.0, ScalarField2D::constant(-0.5)).dispersion_C({0, 0}), DomainViolation);
  CHECK_NOTHROW(SymbolModel::schrodinger(2.0, bumpy).dispersion_C({3, 3}));
}

TEST_CASE("on-shell R") {
  const auto one = ScalarField2D::constant(1.0);
  const auto ww = SymbolModel::waterwave(1.0, one);
  CHECK(ww.factor_R_onshell({0, 0}, {kY1, 0}) == Approx(kR_ww).epsilon(1e-12));
  CHECK_THROWS_AS(ww.factor_R_onshell({0, 0}, {2 * kY1, 0}), ShellViolation);
  CHECK(SymbolModel::schrodinger(2.0, ScalarField2D()).factor_R_onshell({0, 0}, {0, 2}) == Approx(4.0));

  for (const auto& m : test_models()) {
    for (const Vec2 x : {Vec2(0.1, 0.2), Vec2(-0.8, 0.9), Vec2(1.5, -0.4)}) {
      const double C = m.dispersion_C(x);
      const Vec2 p = Vec2(std::cos(0.3), std::sin(0.3)) / C;
      const double R = m.factor_R(x);
      CHECK(std::abs(m.factor_R_onshell(x, p) - R) <= 1e-10 * std::abs(R));
    }
  }
}

TEST_CASE("dispersion consistency on random admissible points") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const auto& m : test_models()) {
    double worst_F = 0.0, worst_R = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vec2 x(u(rng), u(rng));
      const double C = m.dispersion_C(x);
      worst_F = std::max(worst_F, std::abs(m.eval_F(x, 1.0 / C) - m.energy()));
      // R as the limit (F - E) / (zC - 1) at z = (1 +- 1e-6)/C.
      const double zp = (1 + 1e-6) / C, zm = (1 - 1e-6) / C;
      const double lim = 0.5 * ((m.eval_F(x, zp) - m.energy()) / (zp * C - 1) +
                                (m.eval_F(x, zm) - m.energy()) / (zm * C - 1));
      const double R = m.factor_R(x);
      worst_R = std::max(worst_R, std::abs(lim - R) / std::abs(R));
    }
    INFO(to_string(m.kind()));
    CHECK(worst_F <= 1e-10);
    CHECK(worst_R <= 1e-4);
  }
}

TEST_CASE("C jets match finite differences") {
  const double d = 1e-5;
  for (const auto& m : test_models()) {
    const Vec2 x(0.4, -0.6);
    const Jet2 c = m.dispersion_C_jet(x);
    for (int k = 0; k < 2; ++k) {
      Vec2 e = Vec2::Zero();
      e[k] = d;
      const double fd = (m.dispersion_C(x + e) - m.dispersion_C(x - e)) / (2 * d);
      CHECK(c.g[k] == Approx(fd).epsilon(1e-7));
      const Vec2 gfd = (m.grad_C(x + e) - m.grad_C(x - e)) / (2 * d);
      CHECK(c.hess(k, 0) == Approx(gfd[0]).epsilon(1e-5).scale(1e-7));
      CHECK(c.hess(k, 1) == Approx(gfd[1]).epsilon(1e-5).scale(1e-7));
    }
  }
}

TEST_CASE("Y solver") {
  CHECK(solve_Y(1.0) == Approx(kY1).epsilon(1e-15));
  CHECK(solve_Y(10.0) == Approx(100.0).epsilon(1e-15));
  CHECK(solve_Y(1e-3) == Approx(0.0010000001666667).epsilon(1e-12));
  for (double e : {1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0}) {
    const double y = solve_Y(e);
    CHECK(std::abs(y * std::tanh(y) - e * e) <= 1e-12 * std::max(1.0, e * e));
  }
  double prev = 0.0;
  for (double e = 0.01; e < 20.0; e *= 1.3) {
    const double y = solve_Y(e);
    CHECK(y > prev);
    prev = y;
  }
  CHECK_THROWS_AS(solve_Y(0.0), DomainViolation);
}

TEST_CASE("dY closed form") {
  CHECK(dY(1.0) == Approx(kdY1).epsilon(1e-13));
  CHECK(dY(10.0) == Approx(20.0).epsilon(1e-12));
  CHECK(dY(1e-3) == Approx(1.0).epsilon(1e-5));
  for (double e : {0.05, 0.3, 1.0, 2.5, 7.0}) {
    const double h = 1e-5 * e;
    const double fd = (solve_Y(e + h) - solve_Y(e - h)) / (2 * h);
    CHECK(dY(e) == Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("Y solver with surface tension") {
  CHECK(solve_Y_tension(1.0, 1.0) == Approx(kYt11).epsilon(1e-14));
  CHECK(solve_Y_tension(1.0, 0.5) == Approx(kYt105).epsilon(1e-14));
  CHECK(solve_Y_tension(1.0, 0.5) > solve_Y_tension(1.0, 1.0));
  CHECK(solve_Y_tension(1.0, 0.5) < solve_Y(1.0));
  CHECK(solve_Y_tension(1.7, 1e-6) == Approx(solve_Y(1.7)).epsilon(1e-12));
  for (double e : {0.3, 1.0, 3.0})
    for (double nu : {0.2, 1.0, 2.0}) {
      const double y = solve_Y_tension(e, nu);
      CHECK(std::abs(tension_partials(y, e, nu).f) <= 1e-12 * std::max(1.0, e * e));
    }
  double prev = 0.0;
  for (double e = 0.05; e < 10.0; e *= 1.3) {
    const double y = solve_Y_tension(e, 0.7);
    CHECK(y > prev);
    prev = y;
  }
}

TEST_CASE("tension partials and dY_tension") {
  const double y = 0.9, e = 1.1, nu = 0.8, d = 1e-6;
  const auto p = tension_partials(y, e, nu);
  CHECK(p.fy == Approx((tension_partials(y + d, e, nu).f - tension_partials(y - d, e, nu).f) / (2 * d)).epsilon(1e-8));
  CHECK(p.fE == Approx((tension_partials(y, e + d, nu).f - tension_partials(y, e - d, nu).f) / (2 * d)).epsilon(1e-8));
  CHECK(p.fnu ==
        Approx((tension_partials(y, e, nu + d).f - tension_partials(y, e, nu - d).f) / (2 * d)).epsilon(1e-8));

  const Vec2 zero = Vec2::Zero();
  CHECK(dY_tension(1.0, 1.0, zero, zero).norm() == 0.0);
  const Vec2 dE(0.3, -0.2);
  const Vec2 lim = dY_tension(1.2, 1e-7, dE, Vec2(1.0, 1.0));
  CHECK(lim.x() == Approx(dY(1.2) * dE.x()).epsilon(1e-10));
  CHECK(lim.y() == Approx(dY(1.2) * dE.y()).epsilon(1e-10));

  // Gaussian depth, unit tension: compare with differences of the composed root.
  const double E = 1.3;
  const auto D = ScalarField2D::constant(1.0) + ScalarField2D::gaussian({0, 0}, {1, 1}, 0.6);
  const auto root_at = [&](const Vec2& x) { return solve_Y_tension(E * std::sqrt(D.value(x)), E); };
  const Vec2 x(0.4, 0.3);
  const Vec2 gD = D.gradient(x);
  const double calE = E * std::sqrt(D.value(x));
  const Vec2 g = dY_tension(calE, E, E * gD / (2 * std::sqrt(D.value(x))), Vec2::Zero());
  const double h = 1e-5;
  for (int k = 0; k < 2; ++k) {
    Vec2 e = Vec2::Zero();
    e[k] = h;
    CHECK(g[k] == Approx((root_at(x + e) - root_at(x - e)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("Hamiltonians vanish on the shell") {
  for (const auto& m : test_models()) {
    const Vec2 x(-0.3, 0.5);
    const Vec2 p = Vec2(0.6, 0.8) / m.dispersion_C(x);
    CHECK(std::abs(m.physical_hamiltonian(x, p).v) <= 1e-12);
    CHECK(std::abs(m.finsler_hamiltonian(x, p).v) <= 1e-12);
    CHECK(m.shell_residual(x, p) <= 1e-14);
  }
}
