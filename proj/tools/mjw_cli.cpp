// mjw: trace rays, build the manifold and atlas, evaluate the wavefield or
// run the invariant suite from a run configuration.
//
// Exit codes: 0 ok, 1 check failure, 2 domain violation, 3 atlas failure,
// 4 quadrature not converged, 5 configuration, usage or I/O error.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fmt/format.h>
#include <iostream>
#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <sstream>

#include "mjw/checks.hpp"
#include "mjw/config.hpp"
#include "mjw/errors.hpp"
#include "mjw/io.hpp"

using namespace mjw;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kDomain = 2, kAtlas = 3, kQuadrature = 4, kConfig = 5 };

struct Args {
  std::string config;
  std::string preset;
  std::string out = "out";
  int workers = 0;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("mjw");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("MJW_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("MJW_LOG: unknown level '{}', keeping warn", env);
    else
      spdlog::set_level(level);
  }
}

RunConfig resolve_config(const Args& a) {
  if (!a.config.empty()) return load_config(a.config);
  if (!a.preset.empty()) return preset(a.preset);
  RunConfig cfg;
  cfg.validate();
  return cfg;
}

std::string out_path(const Args& a, const std::string& name) { return (std::filesystem::path(a.out) / name).string(); }

void prepare(const Args& a, const RunConfig& cfg) {
  std::filesystem::create_directories(a.out);
  write_file(out_path(a, "run.cfg"), serialize_config(cfg));
}

int cmd_trace(const Args& a, const RunConfig& cfg) {
  prepare(a, cfg);
  const auto model = make_model(cfg);
  const auto curve = make_curve(cfg, model);
  const double horizon = cfg.grid.tau_max;
  IntegrateOptions io;
  for (int j = 0; j < cfg.grid.n_tau; ++j) io.sample_at.push_back(horizon * j / (cfg.grid.n_tau - 1));
  const bool waterwave = model.kind() == ModelKind::waterwave || model.kind() == ModelKind::waterwave_tension;

  std::vector<std::pair<double, Trajectory>> rays;
  json report;
  json per_ray = json::array();
  double worst = 0.0, worst_reduced = 0.0;
  for (double phi : ray_phis(curve, cfg.trace.rays)) {
    const auto ic = curve.point(phi);
    const auto var = curve.variation(phi);
    try {
      rays.emplace_back(phi, integrate(model, FlowKind::finsler, ic, var, horizon, cfg.ode, io));
      const double dev = verify_correspondence(model, ic, var, horizon, cfg.ode);
      worst = std::max(worst, dev);
      json r = {{"phi", phi}, {"deviation", dev}, {"caustics", rays.back().second.caustics.size()}};
      if (waterwave) {
        const double red = compare_tau_flows(model, FlowKind::reduced, FlowKind::finsler, ic, var, horizon, cfg.ode);
        worst_reduced = std::max(worst_reduced, red);
        r["reduced_vs_finsler"] = red;
      }
      per_ray.push_back(r);
    } catch (const DomainViolation& e) {
      throw DomainViolation(fmt::format("ray phi = {}: {}", phi, e.what()));
    }
  }
  std::ostringstream csv;
  write_trajectory_csv(csv, rays);
  write_file(out_path(a, "trajectories.csv"), csv.str());
  report["rays"] = per_ray;
  report["max_deviation"] = worst;
  report["correspondence_pass"] = worst <= cfg.check.correspondence;
  if (waterwave) report["max_reduced_vs_finsler"] = worst_reduced;
  write_file(out_path(a, "correspondence.json"), report.dump(2) + "\n");
  std::cout << fmt::format("traced {} rays, max correspondence deviation {:.3e}\n", rays.size(), worst);
  return kOk;
}

Atlas build(const RunConfig& cfg, Execution exec = Execution::parallel) {
  const auto model = make_model(cfg);
  const auto curve = make_curve(cfg, model);
  spdlog::info("manifold {} x {}", cfg.grid.n_phi, cfg.grid.n_tau);
  auto grid = std::make_shared<const LagrangianGrid>(build_manifold(model, curve, cfg.grid, cfg.ode, exec));
  const auto caustics = detect_caustics(*grid);
  spdlog::info("{} caustic polylines", caustics.polylines.size());
  return build_atlas(grid, caustics, cfg.atlas);
}

int cmd_manifold(const Args& a, const RunConfig& cfg) {
  prepare(a, cfg);
  const auto atlas = build(cfg);
  std::ostringstream csv, svg;
  write_manifold_csv(csv, atlas.grid());
  write_file(out_path(a, "manifold.csv"), csv.str());
  write_file(out_path(a, "caustics.json"), caustics_json(atlas.caustics()).dump(2) + "\n");
  write_file(out_path(a, "atlas.json"), atlas_json(atlas).dump(2) + "\n");
  write_manifold_svg(svg, atlas);
  write_file(out_path(a, "manifold.svg"), svg.str());
  std::cout << fmt::format("{} caustic polylines, {} charts\n", atlas.caustics().polylines.size(),
                           atlas.charts().size());
  return kOk;
}

int cmd_field(const Args& a, const RunConfig& cfg) {
  prepare(a, cfg);
  const auto atlas = build(cfg);
  const auto pts = field_points(cfg);
  spdlog::info("field at {} points, h = {}", pts.size(), cfg.field.h);
  const auto wf = eval_field(atlas, pts, cfg.field.h, unit_amplitude(), field_options(cfg));
  std::ostringstream csv, pgm;
  write_wavefield_csv(csv, wf);
  write_file(out_path(a, "wavefield.csv"), csv.str());
  write_heatmap_pgm(pgm, wf, cfg.field.n1, cfg.field.n2, &atlas.caustics());
  write_file(out_path(a, "heatmap.pgm"), pgm.str());
  if (cfg.field.breakdown) write_file(out_path(a, "breakdown.json"), wavefield_breakdown_json(wf).dump(2) + "\n");
  std::cout << fmt::format("evaluated {} points\n", wf.points.size());
  return kOk;
}

int cmd_check(const Args& a, const RunConfig& cfg) {
  prepare(a, cfg);
  const auto rep = run_checks(cfg);
  write_file(out_path(a, "check.json"), rep.to_json().dump(2) + "\n");
  for (const auto& r : rep.results)
    std::cout << fmt::format("{:<24} {:<4} value {:.3e} threshold {:.3e}{}\n", r.name, r.pass ? "ok" : "FAIL", r.value,
                             r.threshold, r.detail.empty() ? "" : "  (" + r.detail + ")");
  if (rep.all_pass()) return kOk;
  std::string names;
  for (const auto& n : rep.failures()) names += (names.empty() ? "" : ", ") + n;
  std::cerr << "failed: " << names << '\n';
  return kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maslov canonical operator wavefields from ray families"};
  app.require_subcommand(1);
  app.fallthrough();
  Args args;
  auto* config_opt = app.add_option("--config", args.config, "Run configuration file")->check(CLI::ExistingFile);
  app.add_option("--preset", args.preset, "Built-in configuration")->check(CLI::IsMember({"fig1"}))->excludes(config_opt);
  app.add_option("--out", args.out, "Output directory")->capture_default_str();
  app.add_option("--workers", args.workers, "Worker threads (0 keeps the OpenMP default)")->check(CLI::NonNegativeNumber);

  int (*command)(const Args&, const RunConfig&) = nullptr;
  app.add_subcommand("trace", "Integrate rays and verify the flow correspondence")->callback([&] { command = cmd_trace; });
  app.add_subcommand("manifold", "Build the manifold, caustics and atlas")->callback([&] { command = cmd_manifold; });
  app.add_subcommand("field", "Evaluate the wavefield on the configured window")->callback([&] { command = cmd_field; });
  app.add_subcommand("check", "Run the invariant suite")->callback([&] { command = cmd_check; });
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  setup_logging();
  if (args.workers > 0) omp_set_num_threads(args.workers);
  try {
    return command(args, resolve_config(args));
  } catch (const DomainViolation& e) {
    spdlog::error("domain violation: {}", e.what());
    return kDomain;
  } catch (const AtlasFailure& e) {
    spdlog::error("atlas failure: {}", e.what());
    return kAtlas;
  } catch (const QuadratureNotConverged& e) {
    spdlog::error("quadrature did not converge: {}", e.what());
    return kQuadrature;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  }
}
