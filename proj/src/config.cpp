#include "mjw/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "mjw/errors.hpp"

namespace mjw {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(fmt::format("{}: '{}' is not a finite number", key, v));
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(fmt::format("{}: '{}' is not true or false", key, v));
}

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class Get>
Key real_key(std::string name, Get ref) {
  return {name, [ref](const RunConfig& c) { return fmt::format("{}", ref(c)); },
          [ref, name](RunConfig& c, const std::string& v) { ref(c) = to_double(name, v); }};
}

template <class Get>
Key int_key(std::string name, Get ref) {
  return {name, [ref](const RunConfig& c) { return fmt::format("{}", ref(c)); },
          [ref, name](RunConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(ref(c))>;
            const long n = to_long(name, v);
            if (n < std::numeric_limits<T>::min() || n > std::numeric_limits<T>::max())
              throw ConfigError(fmt::format("{}: {} is out of range", name, v));
            ref(c) = static_cast<T>(n);
          }};
}

template <class Get>
Key bool_key(std::string name, Get ref) {
  return {name, [ref](const RunConfig& c) { return std::string(ref(c) ? "true" : "false"); },
          [ref, name](RunConfig& c, const std::string& v) { ref(c) = to_bool(name, v); }};
}

template <class Get>
Key str_key(std::string name, Get ref) {
  return {name, [ref](const RunConfig& c) { return ref(c); },
          [ref](RunConfig& c, const std::string& v) { ref(c) = v; }};
}

#define MJW_REF(member) [](auto& c) -> auto& { return c.member; }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      str_key("model.kind", MJW_REF(model.kind)),
      real_key("model.E", MJW_REF(model.E)),
      str_key("model.U", MJW_REF(model.U)),
      str_key("model.m", MJW_REF(model.m)),
      str_key("model.D", MJW_REF(model.D)),
      str_key("model.mu", MJW_REF(model.mu)),
      int_key("model.branch", MJW_REF(model.branch)),
      str_key("curve.kind", MJW_REF(curve.kind)),
      real_key("curve.k", MJW_REF(curve.k)),
      real_key("curve.a", MJW_REF(curve.a)),
      real_key("curve.phi_min", MJW_REF(curve.phi_min)),
      real_key("curve.phi_max", MJW_REF(curve.phi_max)),
      real_key("curve.b", MJW_REF(curve.b)),
      real_key("curve.x1", MJW_REF(curve.x1)),
      real_key("curve.x2", MJW_REF(curve.x2)),
      str_key("curve.table", MJW_REF(curve.table)),
      int_key("grid.n_phi", MJW_REF(grid.n_phi)),
      int_key("grid.n_tau", MJW_REF(grid.n_tau)),
      real_key("grid.tau_max", MJW_REF(grid.tau_max)),
      real_key("grid.tau_start_ratio", MJW_REF(grid.tau_start_ratio)),
      real_key("ode.rel_tol", MJW_REF(ode.rel_tol)),
      real_key("ode.abs_tol", MJW_REF(ode.abs_tol)),
      real_key("ode.max_step", MJW_REF(ode.max_step)),
      int_key("ode.max_steps", MJW_REF(ode.max_steps)),
      real_key("atlas.tube_width", MJW_REF(atlas.tube_width)),
      int_key("atlas.bands", MJW_REF(atlas.bands)),
      real_key("atlas.band_overlap_cells", MJW_REF(atlas.band_overlap_cells)),
      real_key("atlas.theta_sing", MJW_REF(atlas.theta_sing)),
      real_key("atlas.theta_focal", MJW_REF(atlas.theta_focal)),
      real_key("quad.abs_tol", MJW_REF(quad.abs_tol)),
      real_key("quad.rel_tol", MJW_REF(quad.rel_tol)),
      int_key("quad.max_panels", MJW_REF(quad.max_panels)),
      real_key("field.h", MJW_REF(field.h)),
      real_key("field.x1_min", MJW_REF(field.x1_min)),
      real_key("field.x1_max", MJW_REF(field.x1_max)),
      real_key("field.x2_min", MJW_REF(field.x2_min)),
      real_key("field.x2_max", MJW_REF(field.x2_max)),
      int_key("field.n1", MJW_REF(field.n1)),
      int_key("field.n2", MJW_REF(field.n2)),
      str_key("field.form", MJW_REF(field.form)),
      bool_key("field.include_singular", MJW_REF(field.include_singular)),
      bool_key("field.polish", MJW_REF(field.polish)),
      bool_key("field.breakdown", MJW_REF(field.breakdown)),
      real_key("field.panel_period_fraction", MJW_REF(field.panel_period_fraction)),
      int_key("trace.rays", MJW_REF(trace.rays)),
      int_key("check.rays", MJW_REF(check.rays)),
      real_key("check.correspondence", MJW_REF(check.correspondence)),
      real_key("check.conservation", MJW_REF(check.conservation)),
      real_key("check.abs_J", MJW_REF(check.abs_J)),
      real_key("check.chain_rule", MJW_REF(check.chain_rule)),
      real_key("check.eikonal", MJW_REF(check.eikonal)),
      real_key("check.shell", MJW_REF(check.shell)),
      real_key("check.partition", MJW_REF(check.partition)),
      real_key("check.factored_rate", MJW_REF(check.factored_rate)),
  };
  return table;
}

#undef MJW_REF

void positive(const char* name, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("{} must be positive and finite", name));
}

std::vector<CurveNode> read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open curve table '{}'", path));
  std::vector<CurveNode> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line.rfind("phi", 0) == 0) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(to_double(fmt::format("{}:{}", path, lineno), trim(cell)));
    if (v.size() != 5) throw ConfigError(fmt::format("{}:{}: expected phi,x1,x2,p1,p2", path, lineno));
    out.push_back({v[0], {v[1], v[2]}, {v[3], v[4]}});
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  model_kind_from_string(model.kind);
  positive("model.E", model.E);
  for (const auto* expr : {&model.U, &model.m, &model.D, &model.mu}) ScalarField2D::parse(*expr);
  if (model.branch != 1 && model.branch != -1) throw ConfigError("model.branch must be 1 or -1");
  if (curve.kind == "scattering") {
    positive("curve.k", curve.k);
    if (!(curve.phi_max > curve.phi_min)) throw ConfigError("curve.phi_max must exceed curve.phi_min");
  } else if (curve.kind == "green") {
    positive("curve.b", curve.b);
  } else if (curve.kind == "custom") {
    if (curve.table.empty()) throw ConfigError("curve.table is required for a custom curve");
  } else {
    throw ConfigError(fmt::format("unknown curve.kind '{}'", curve.kind));
  }
  grid.validate();
  ode.validate();
  if (ode.max_steps < 1) throw ConfigError("ode.max_steps must be positive");
  atlas.validate();
  quad.validate();
  positive("field.h", field.h);
  if (!(field.x1_max > field.x1_min) || !(field.x2_max > field.x2_min))
    throw ConfigError("field window must have max > min");
  if (field.n1 < 1 || field.n2 < 1) throw ConfigError("field.n1 and field.n2 must be positive");
  field_form_from_string(field.form);
  field_options(*this).validate();
  if (trace.rays < 1 || check.rays < 1) throw ConfigError("ray counts must be positive");
  for (const double v : {check.correspondence, check.conservation, check.abs_J, check.chain_rule, check.eikonal,
                         check.shell, check.partition, check.factored_rate})
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("check thresholds must be positive and finite");
}

bool RunConfig::operator==(const RunConfig& o) const {
  return model == o.model && curve == o.curve && grid == o.grid && ode == o.ode && atlas == o.atlas && quad == o.quad &&
         field == o.field && trace == o.trace && check == o.check;
}

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected 'key = value'", lineno));
    const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
    if (it == table.end()) throw ConfigError(fmt::format("line {}: unknown key '{}'", lineno, key));
    if (!seen.insert(key).second) throw ConfigError(fmt::format("line {}: repeated key '{}'", lineno, key));
    try {
      it->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(ss.str(), dir.empty() ? "." : dir.string());
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    const std::string sec = k.name.substr(0, k.name.find('.'));
    if (!section.empty() && sec != section) out += '\n';
    section = sec;
    out += fmt::format("{} = {}\n", k.name, k.get(cfg));
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.push_back(k.name);
  return out;
}

RunConfig preset(const std::string& name) {
  if (name != "fig1") throw ConfigError(fmt::format("unknown preset '{}'", name));
  RunConfig c;
  c.model.kind = "helmholtz";
  c.model.E = 2.0;
  c.model.U = "product(smoothstep(x2, 0, 1), gaussian(5, 3, 1, 1, 1))";
  c.curve.kind = "scattering";
  c.curve.k = 2.0;
  c.curve.a = 0.0;
  c.curve.phi_min = 0.0;
  c.curve.phi_max = 10.0;
  c.grid.n_phi = 401;
  c.grid.n_tau = 400;
  c.grid.tau_max = 12.0;
  c.field.h = 0.05;
  c.field.x1_min = 1.0;
  c.field.x1_max = 9.0;
  c.field.x2_min = 0.5;
  c.field.x2_max = 6.1;
  c.field.n1 = 41;
  c.field.n2 = 29;
  c.validate();
  return c;
}

SymbolModel make_model(const RunConfig& cfg) {
  const auto& m = cfg.model;
  switch (model_kind_from_string(m.kind)) {
    case ModelKind::schrodinger: return SymbolModel::schrodinger(m.E, ScalarField2D::parse(m.U));
    case ModelKind::helmholtz: return SymbolModel::helmholtz(m.E, ScalarField2D::parse(m.U));
    case ModelKind::graphene:
      return SymbolModel::graphene(m.E, ScalarField2D::parse(m.U), ScalarField2D::parse(m.m), m.branch);
    case ModelKind::waterwave: return SymbolModel::waterwave(m.E, ScalarField2D::parse(m.D));
    case ModelKind::waterwave_tension:
      return SymbolModel::waterwave_tension(m.E, ScalarField2D::parse(m.D), ScalarField2D::parse(m.mu));
  }
  throw ConfigError("unknown model kind");
}

InitialCurve make_curve(const RunConfig& cfg, const SymbolModel& model) {
  const auto& c = cfg.curve;
  if (c.kind == "scattering") return InitialCurve::scattering(model, c.k, c.a, c.phi_min, c.phi_max);
  if (c.kind == "green") return InitialCurve::green(model, c.b, {c.x1, c.x2});
  if (c.kind == "custom") {
    const auto path = std::filesystem::path(cfg.base_dir) / c.table;
    return InitialCurve::custom(model, read_table(path.string()));
  }
  throw ConfigError(fmt::format("unknown curve.kind '{}'", c.kind));
}

FieldOptions field_options(const RunConfig& cfg) {
  FieldOptions o;
  o.form = field_form_from_string(cfg.field.form);
  o.include_singular = cfg.field.include_singular;
  o.polish = cfg.field.polish;
  o.panel_period_fraction = cfg.field.panel_period_fraction;
  o.quad = cfg.quad;
  return o;
}

std::vector<Vec2> field_points(const RunConfig& cfg) {
  const auto& f = cfg.field;
  std::vector<Vec2> pts;
  pts.reserve(static_cast<size_t>(f.n1) * static_cast<size_t>(f.n2));
  const auto at = [](double lo, double hi, int n, int k) { return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * k / (n - 1); };
  for (int j = 0; j < f.n2; ++j)
    for (int i = 0; i < f.n1; ++i) pts.push_back({at(f.x1_min, f.x1_max, f.n1, i), at(f.x2_min, f.x2_max, f.n2, j)});
  return pts;
}

}  // namespace mjw
