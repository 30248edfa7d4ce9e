#pragma once

// Run configuration: flat `section.key = value` text.
//
//   # comment
//   model.kind = helmholtz            schrodinger | helmholtz | graphene | waterwave | waterwave_tension
//   model.U = product(smoothstep(x2, 0, 1), gaussian(5, 3, 1, 1, 1))
//   curve.kind = scattering           scattering | green | custom
//   grid.n_phi = 401
//
// Field-valued keys (model.U, model.m, model.D, model.mu) take the grammar of
// field.hpp. curve.table names a CSV file with columns phi,x1,x2,p1,p2,
// resolved against the directory of the config file. Unknown keys, repeated
// keys and malformed values are rejected with ConfigError.

#include <string>
#include <vector>

#include "mjw/atlas.hpp"
#include "mjw/canop.hpp"

namespace mjw {

struct ModelSpec {
  std::string kind = "helmholtz";
  double E = 2.0;
  std::string U = "0", m = "0", D = "1", mu = "0";
  int branch = 1;
  bool operator==(const ModelSpec&) const = default;
};

struct CurveSpec {
  std::string kind = "scattering";
  double k = 2.0, a = 0.0, phi_min = 0.0, phi_max = 10.0;  // scattering
  double b = 1.0, x1 = 0.0, x2 = 0.0;                      // green
  std::string table;                                       // custom
  bool operator==(const CurveSpec&) const = default;
};

struct FieldSpec {
  double h = 0.02;
  double x1_min = 0.0, x1_max = 10.0, x2_min = 0.0, x2_max = 10.0;
  int n1 = 51, n2 = 51;
  std::string form = "general";
  bool include_singular = true;
  bool polish = true;
  bool breakdown = false;  // per-point contribution JSON
  double panel_period_fraction = 0.5;
  bool operator==(const FieldSpec&) const = default;
};

struct TraceSpec {
  int rays = 20;
  bool operator==(const TraceSpec&) const = default;
};

/// Pass thresholds of the invariant suite.
struct CheckSpec {
  int rays = 20;
  double correspondence = 1e-6;
  double conservation = 1e-8;
  double abs_J = 1e-6;
  double chain_rule = 1e-6;
  double eikonal = 1e-8;
  double shell = 1e-8;
  double partition = 1e-12;
  double factored_rate = 0.8;
  bool operator==(const CheckSpec&) const = default;
};

struct RunConfig {
  ModelSpec model;
  CurveSpec curve;
  GridSettings grid;
  ODESettings ode;
  AtlasSettings atlas;
  QuadSettings quad;
  FieldSpec field;
  TraceSpec trace;
  CheckSpec check;
  std::string base_dir = ".";  // for curve.table; not serialized

  /// Numeric ranges, enum names and field expressions. Throws ConfigError.
  void validate() const;
  bool operator==(const RunConfig& o) const;
};

RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);
/// Every key in canonical order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& cfg);
/// Names accepted by parse_config.
std::vector<std::string> config_keys();

/// Built-in configurations. "fig1": helmholtz E = 2 with the smoothly
/// switched-on Gaussian bump and a scattering line at x2 = 0.
RunConfig preset(const std::string& name);

SymbolModel make_model(const RunConfig& cfg);
InitialCurve make_curve(const RunConfig& cfg, const SymbolModel& model);
FieldOptions field_options(const RunConfig& cfg);
/// Row-major x1-fastest grid over the field window.
std::vector<Vec2> field_points(const RunConfig& cfg);

}  // namespace mjw
