#include "mjw/quadrature.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "mjw/errors.hpp"

namespace mjw {

void QuadSettings::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw ConfigError("quadrature tolerances must be positive");
  if (max_panels < 1) throw ConfigError("quadrature max_panels must be positive");
}

namespace {

constexpr double xgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                           0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                           0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                           0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double wgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                           0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                           0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                           0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                          0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b;
  Complex value;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

Panel gk15(const std::function<Complex(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  const Complex fc = f(c);
  Complex kron = wgk[7] * fc, gauss = wg[3] * fc;
  for (int k = 0; k < 7; ++k) {
    const Complex s = f(c - r * xgk[k]) + f(c + r * xgk[k]);
    kron += wgk[k] * s;
    if (k % 2 == 1) gauss += wg[k / 2] * s;
  }
  return {a, b, kron * r, std::abs((kron - gauss) * r)};
}

}  // namespace

QuadResult integrate_gk15(const std::function<Complex(double)>& f, double a, double b, int initial_panels,
                          const QuadSettings& settings) {
  settings.validate();
  QuadResult res;
  if (!(b > a)) return res;
  const int n0 = std::max(1, initial_panels);
  if (n0 > settings.max_panels)
    throw QuadratureNotConverged(fmt::format("{} initial panels exceed the limit of {}", n0, settings.max_panels));

  std::priority_queue<Panel> heap;
  Complex total = 0.0;
  double err = 0.0;
  for (int k = 0; k < n0; ++k) {
    const Panel p = gk15(f, a + (b - a) * k / n0, a + (b - a) * (k + 1) / n0);
    total += p.value;
    err += p.error;
    heap.push(p);
  }
  int panels = n0;
  while (err > std::max(settings.abs_tol, settings.rel_tol * std::abs(total))) {
    if (panels >= settings.max_panels)
      throw QuadratureNotConverged(fmt::format("no convergence on [{}, {}] after {} panels: |I| = {}, error = {}", a,
                                               b, panels, std::abs(total), err));
    const Panel p = heap.top();
    heap.pop();
    const double m = 0.5 * (p.a + p.b);
    const Panel l = gk15(f, p.a, m), r = gk15(f, m, p.b);
    total += l.value + r.value - p.value;
    err += l.error + r.error - p.error;
    heap.push(l);
    heap.push(r);
    ++panels;
  }
  // Final sum left to right.
  std::vector<Panel> all;
  all.reserve(heap.size());
  while (!heap.empty()) {
    all.push_back(heap.top());
    heap.pop();
  }
  std::sort(all.begin(), all.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  res.value = 0.0;
  res.error = 0.0;
  for (const auto& p : all) {
    res.value += p.value;
    res.error += p.error;
  }
  res.panels = panels;
  res.evaluations = 15L * (n0 + 2L * (panels - n0));
  return res;
}

}  // namespace mjw
