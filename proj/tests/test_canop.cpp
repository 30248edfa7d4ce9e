#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <memory>

#include "mjw/canop.hpp"
#include "mjw/errors.hpp"

using namespace mjw;
using doctest::Approx;

namespace {

std::shared_ptr<const LagrangianGrid> make_grid(const SymbolModel& model, const InitialCurve& curve, int n_phi,
                                                int n_tau, double tau_max) {
  GridSettings gs;
  gs.n_phi = n_phi;
  gs.n_tau = n_tau;
  gs.tau_max = tau_max;
  return std::make_shared<const LagrangianGrid>(build_manifold(model, curve, gs, ODESettings{}));
}

Atlas make_atlas(std::shared_ptr<const LagrangianGrid> g) { return build_atlas(g, detect_caustics(*g)); }

const Atlas& bump_atlas() {
  static const Atlas atlas = [] {
    const auto m = SymbolModel::helmholtz(2.0, ScalarField2D::parse("product(smoothstep(x2, 0, 1), gaussian(5, 3, 1, 1, 1))"));
    return make_atlas(make_grid(m, InitialCurve::scattering(m, 2.0, 0.0, 0.0, 10.0), 401, 400, 12.0));
  }();
  return atlas;
}

double smooth_bump(double d, double b) { return 1.0 - smootherstep((d - 0.5 * b) / (0.5 * b)); }

}  // namespace

TEST_CASE("free plane wave") {
  const auto free = SymbolModel::schrodinger(2.0, ScalarField2D::constant(0.0));
  const auto atlas = make_atlas(make_grid(free, InitialCurve::scattering(free, 2.0, 0.0, 0.0, 4.0), 41, 41, 10.0));
  REQUIRE(atlas.charts().size() == 1);
  CHECK(atlas.charts()[0].kind == ChartKind::regular);
  CHECK(atlas.partition_error() <= 1e-12);
  for (const Vec2 x : {Vec2(1.0, 3.0), Vec2(2.5, 1.7), Vec2(0.8, 4.4)})
    for (double h : {0.1, 0.01}) {
      const auto fp = eval_point(atlas, x, h, unit_amplitude(), FieldOptions{});
      CHECK(fp.leaf_count == 1);
      const Complex exact = std::exp(Complex(0.0, 2.0 * x.y() / h)) / std::sqrt(2.0);
      CHECK(std::abs(fp.psi - exact) <= 1e-8);
    }
  CHECK_FALSE(solve_singular_tau(atlas, atlas.charts()[0], {1.0, 2.0}, 1.0).has_value());
}

TEST_CASE("free cylindrical wave") {
  const auto free = SymbolModel::schrodinger(2.0, ScalarField2D::constant(0.0));
  const auto atlas = make_atlas(make_grid(free, InitialCurve::green(free, 2.0, {0, 0}), 64, 41, 10.0));
  CHECK(atlas.caustics().polylines.empty());
  std::vector<double> rs, amps;
  for (double r : {0.8, 1.2, 1.8, 2.7, 4.0}) {
    const Vec2 x = r * Vec2(std::cos(0.7 * r), std::sin(0.7 * r));
    const auto fp = eval_point(atlas, x, 0.01, unit_amplitude(), FieldOptions{});
    CHECK(fp.leaf_count == 1);
    const Complex exact = std::exp(Complex(0.0, 2.0 * r / 0.01)) / std::sqrt(2.0 * r);
    CHECK(std::abs(fp.psi - exact) <= 1e-8);
    rs.push_back(r);
    amps.push_back(std::abs(fp.psi));
  }
  CHECK(loglog_slope(rs, amps) == Approx(-0.5).epsilon(1e-6));
}

TEST_CASE("waterwave specialized form equals the general one") {
  const auto ww = SymbolModel::waterwave(1.0, ScalarField2D::parse("sum(1, product(smoothstep(x2, 1, 2), gaussian(2, 3.5, 0.8, 0.8, -0.4)))"));
  const double k = 1.0 / ww.dispersion_C({0.0, 0.0});
  CHECK(k == Approx(1.1996786402577338).epsilon(1e-9));
  const auto atlas = make_atlas(make_grid(ww, InitialCurve::scattering(ww, k, 0.0, 0.0, 4.0), 81, 80, 6.0));
  FieldOptions general, special;
  special.form = FieldForm::waterwave_specialized;
  for (const Vec2 x : {Vec2(1.0, 2.0), Vec2(3.0, 1.5), Vec2(2.0, 4.5)}) {
    // Identity on the shell: R and C taken from (X, P) at the root.
    for (const auto& r : solve_regular_roots(atlas, x)) {
      const double R = ww.factor_R_onshell_unchecked(r.X, r.P), C = 1.0 / r.P.norm();
      const Complex expect = regular_branch(atlas, r, 0.02, unit_amplitude(), FieldForm::general) *
                             std::sqrt(ww.factor_R(r.X) * ww.dispersion_C(r.X) / (R * C));
      const Complex got = regular_branch(atlas, r, 0.02, unit_amplitude(), FieldForm::waterwave_specialized);
      CHECK(std::abs(got - expect) <= 1e-10 * std::abs(expect));
    }
    // Full fields differ only by the shell drift of the sampled momenta.
    const auto a = eval_point(atlas, x, 0.02, unit_amplitude(), general);
    const auto b = eval_point(atlas, x, 0.02, unit_amplitude(), special);
    REQUIRE(a.leaf_count >= 1);
    CHECK(std::abs(a.psi - b.psi) <= 1e-6 * std::abs(a.psi));
  }
  const auto free = SymbolModel::schrodinger(2.0, ScalarField2D::constant(0.0));
  const auto other = make_atlas(make_grid(free, InitialCurve::scattering(free, 2.0, 0.0, 0.0, 1.0), 11, 11, 2.0));
  CHECK_THROWS_AS(eval_point(other, {0.5, 0.5}, 0.1, unit_amplitude(), special), ConfigError);
}

TEST_CASE("bump atlas") {
  const auto& atlas = bump_atlas();
  CHECK(atlas.caustics().polylines.size() == 2);
  CHECK(atlas.partition_error() <= 1e-12);
  int singular = 0;
  for (const auto& c : atlas.charts()) {
    if (c.kind != ChartKind::singular) continue;
    ++singular;
    CHECK(c.index_consistent);
    for (int m : singular_indices(atlas, c)) CHECK(m == c.maslov);
  }
  CHECK(singular == 2);

  SUBCASE("leaf counts inside and outside the folds") {
    for (const Vec2 x : {Vec2(2.9, 5.0), Vec2(2.9, 5.3), Vec2(7.1, 5.3)})
      CHECK(solve_regular_roots(atlas, x).size() == 3);
    for (const Vec2 x : {Vec2(1.0, 5.3), Vec2(5.0, 2.0), Vec2(9.0, 6.0)})
      CHECK(solve_regular_roots(atlas, x).size() == 1);
  }

  SUBCASE("singular integral matches a regular branch by stationary phase") {
    const Vec2 x(2.5, 5.5);
    const auto roots = solve_regular_roots(atlas, x);
    REQUIRE(roots.size() == 3);
    const RegularRoot* r = nullptr;
    for (const auto& q : roots)
      if (q.morse == 1) r = &q;
    REQUIRE(r != nullptr);
    const int ms = r->morse + ((r->J > 0.0) == (det2(r->P, r->P_phi) > 0.0) ? 0 : 1);
    std::vector<double> hs, errs;
    for (double h : {0.01, 0.0025, 0.000625}) {
      const auto w = [&](double, double phi) { return smooth_bump(std::abs(phi - r->phi), 0.6); };
      const auto s = eval_singular_local(atlas, x, h, unit_amplitude(), FieldOptions{}, r->phi - 0.6, r->phi + 0.6,
                                         r->tau, ms, w);
      const Complex reg = regular_branch(atlas, *r, h, unit_amplitude(), FieldForm::general);
      hs.push_back(h);
      errs.push_back(std::abs(s.value - reg) / std::abs(reg));
    }
    CHECK(errs.back() <= 1e-3);
    CHECK(loglog_slope(hs, errs) >= 0.8);
  }

  SUBCASE("factored form converges") {
    const auto rep = factored_form_check(atlas, {{4.5, 5.0}, {5.0, 5.5}}, {1.0 / 25, 1.0 / 50, 1.0 / 100},
                                         unit_amplitude());
    CHECK(rep.transported_vs_divided <= 1e-4);
    for (double p : rep.rates) CHECK(p >= 0.8);
  }

  SUBCASE("serial and parallel fields agree") {
    std::vector<Vec2> pts;
    for (double x1 = 2.0; x1 <= 4.0; x1 += 0.5) pts.push_back({x1, 5.3});
    const auto a = eval_field(atlas, pts, 0.02, unit_amplitude(), FieldOptions{}, Execution::serial);
    omp_set_num_threads(4);
    const auto b = eval_field(atlas, pts, 0.02, unit_amplitude(), FieldOptions{}, Execution::parallel);
    for (size_t k = 0; k < pts.size(); ++k) {
      CHECK(a.points[k].psi == b.points[k].psi);
      CHECK(a.points[k].leaf_count == b.points[k].leaf_count);
    }
  }
}

TEST_CASE("singular tau on a tube") {
  const auto& atlas = bump_atlas();
  const Chart* sing = nullptr;
  for (const auto& c : atlas.charts())
    if (c.kind == ChartKind::singular && c.polyline == 0) sing = &c;
  REQUIRE(sing != nullptr);
  const auto& nd = atlas.caustics().polylines[0].nodes[10];
  // On the caustic the root is the caustic point itself.
  const auto tau = solve_singular_tau(atlas, *sing, nd.x, nd.phi);
  REQUIRE(tau.has_value());
  CHECK(*tau == Approx(nd.tau).epsilon(1e-6));
}

TEST_CASE("field errors") {
  const auto& atlas = bump_atlas();
  CHECK_THROWS_AS(eval_point(atlas, {1, 1}, 0.0, unit_amplitude(), FieldOptions{}), ConfigError);
  FieldOptions bad;
  bad.panel_period_fraction = 2.0;
  CHECK_THROWS_AS(eval_field(atlas, {{1, 1}}, 0.1, unit_amplitude(), bad), ConfigError);
  CHECK(field_form_from_string(to_string(FieldForm::factored)) == FieldForm::factored);
  CHECK_THROWS_AS(field_form_from_string("spectral"), ConfigError);
}
