// Serial vs OpenMP timings of the two parallel kernels, manifold
// construction and wavefield evaluation, on the bump preset. Results of
// both paths are compared bit for bit.
//
// usage: bench_kernels [repeats] [field points per side]

#include <chrono>
#include <cstdlib>
#include <fmt/format.h>
#include <omp.h>

#include "mjw/config.hpp"

using namespace mjw;

namespace {

template <class F>
double best_of(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
  const int side = argc > 2 ? std::atoi(argv[2]) : 24;
  auto cfg = preset("fig1");
  cfg.field.n1 = cfg.field.n2 = side;
  const auto model = make_model(cfg);
  const auto curve = make_curve(cfg, model);
  fmt::print("threads {}  repeats {}\n", omp_get_max_threads(), repeats);

  std::shared_ptr<const LagrangianGrid> grid;
  const double m_ser = best_of(repeats, [&] {
    grid = std::make_shared<const LagrangianGrid>(build_manifold(model, curve, cfg.grid, cfg.ode, Execution::serial));
  });
  std::shared_ptr<const LagrangianGrid> grid_par;
  const double m_par = best_of(repeats, [&] {
    grid_par = std::make_shared<const LagrangianGrid>(build_manifold(model, curve, cfg.grid, cfg.ode, Execution::parallel));
  });
  bool same = true;
  for (int i = 0; i < grid->n_phi() && same; ++i)
    for (int j = 0; j < grid->column_length(i) && same; ++j)
      same = grid->at(i, j).point.x == grid_par->at(i, j).point.x && grid->at(i, j).J == grid_par->at(i, j).J;
  fmt::print("build_manifold {}x{}  serial {:.3f} s  parallel {:.3f} s  speedup {:.2f}  identical {}\n", cfg.grid.n_phi,
             cfg.grid.n_tau, m_ser, m_par, m_ser / m_par, same);

  const auto atlas = build_atlas(grid, detect_caustics(*grid), cfg.atlas);
  const auto pts = field_points(cfg);
  const auto opts = field_options(cfg);
  Wavefield a, b;
  const double f_ser = best_of(repeats, [&] { a = eval_field(atlas, pts, cfg.field.h, unit_amplitude(), opts, Execution::serial); });
  const double f_par = best_of(repeats, [&] { b = eval_field(atlas, pts, cfg.field.h, unit_amplitude(), opts, Execution::parallel); });
  same = true;
  for (size_t k = 0; k < pts.size(); ++k) same = same && a.points[k].psi == b.points[k].psi;
  fmt::print("eval_field {} points  serial {:.3f} s  parallel {:.3f} s  speedup {:.2f}  identical {}\n", pts.size(), f_ser,
             f_par, f_ser / f_par, same);
  return same ? 0 : 1;
}
