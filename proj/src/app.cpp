#include "morphosim/app.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace morphosim {

const char *const kVersion = "1.0.0";

namespace {

enum class Kind { boolean, integer, real, text };

struct KeySpec {
  const char *section;
  const char *key;
  Kind kind;
  double lo;         // inclusive lower bound for numbers
  double hi;         // inclusive upper bound
  bool lo_open;      // lower bound excluded
  std::vector<std::string> choices;  // for text keys; empty means free text
};

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<KeySpec> &schema() {
  static const std::vector<KeySpec> s = [] {
    std::vector<KeySpec> v;
    auto pos = [&](const char *sec, const char *k) { v.push_back({sec, k, Kind::real, 0.0, kInf, true, {}}); };
    auto nonneg = [&](const char *sec, const char *k) { v.push_back({sec, k, Kind::real, 0.0, kInf, false, {}}); };
    auto any = [&](const char *sec, const char *k) { v.push_back({sec, k, Kind::real, -kInf, kInf, false, {}}); };
    auto integer = [&](const char *sec, const char *k, double lo) {
      v.push_back({sec, k, Kind::integer, lo, 1e9, false, {}});
    };
    auto flag = [&](const char *sec, const char *k) { v.push_back({sec, k, Kind::boolean, 0, 0, false, {}}); };
    v.push_back({"run", "problem", Kind::text, 0, 0, false, problem_names()});
    v.push_back({"run", "out", Kind::text, 0, 0, false, {}});
    integer("run", "snapshot_every", 1);

    pos("scheme", "dt");
    pos("scheme", "T");
    v.push_back({"scheme", "bulk_scheme", Kind::text, 0, 0, false, {"crank_nicolson", "imex_euler"}});
    pos("scheme", "picard_tol");
    integer("scheme", "picard_max_iters", 1);
    flag("scheme", "conservation_check");
    flag("scheme", "lag_ale_velocity");
    flag("scheme", "predictor_uses_previous");

    pos("mesh", "radius");
    integer("mesh", "n_boundary", 8);
    pos("mesh", "width_factor");
    pos("mesh", "star_h");
    pos("mesh", "outer_radius");
    integer("mesh", "n_outer", 8);
    v.push_back({"mesh", "grading", Kind::real, 1.0, kInf, false, {}});
    integer("mesh", "refine_levels", 0);

    pos("motion", "curve_tau");
    pos("motion", "mmpde_tau");
    any("motion", "extra_tangential_amplitude");
    nonneg("motion", "extra_tangential_frequency");

    for (const char *k : {"R0", "k0", "gamma", "K", "delta", "sigma", "D_cs", "D_c", "omega_factor"})
      pos("wave_pinning", k);
    for (const char *k : {"s_l", "s_h", "c0"}) nonneg("wave_pinning", k);

    for (const char *k : {"k1", "k_minus1", "D_ls", "D_l", "N_R", "R_outer", "K_prot", "upsilon", "sigma_l",
                          "trigger_distance"})
      pos("ligand", k);
    for (const char *k : {"epsilon", "beta", "source_strength"}) nonneg("ligand", k);
    v.push_back({"ligand", "R_tilde0", Kind::real, 0.0, 1.0, true, {}});

    for (const char *k : {"k1", "k2", "Km1", "Km2", "S", "D"}) pos("strychalski", k);
    any("strychalski", "u_bx");
    any("strychalski", "u_by");
    return v;
  }();
  return s;
}

const std::vector<std::string> &section_order() {
  static const std::vector<std::string> s = {"run", "scheme", "mesh", "motion", "wave_pinning", "ligand",
                                             "strychalski"};
  return s;
}

const KeySpec *find_key(const std::string &section, const std::string &key) {
  for (const auto &k : schema())
    if (section == k.section && key == k.key) return &k;
  return nullptr;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

ConfigValue convert(const KeySpec &spec, const std::string &raw) {
  const std::string name = std::string(spec.section) + "." + spec.key;
  switch (spec.kind) {
    case Kind::boolean:
      if (raw == "true" || raw == "1" || raw == "yes") return true;
      if (raw == "false" || raw == "0" || raw == "no") return false;
      throw ConfigError(name + ": expected true or false, got '" + raw + "'");
    case Kind::integer: {
      std::size_t used = 0;
      long v = 0;
      try {
        v = std::stol(raw, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used != raw.size() || raw.empty()) throw ConfigError(name + ": expected an integer, got '" + raw + "'");
      if (v < spec.lo || v > spec.hi)
        throw ConfigError(name + ": value " + raw + " out of range (minimum " + std::to_string(long(spec.lo)) + ")");
      return v;
    }
    case Kind::real: {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(raw, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used != raw.size() || raw.empty() || !std::isfinite(v))
        throw ConfigError(name + ": expected a number, got '" + raw + "'");
      const bool below = spec.lo_open ? !(v > spec.lo) : !(v >= spec.lo);
      if (below || v > spec.hi) {
        std::ostringstream os;
        os << name << ": value " << raw << " out of range";
        if (spec.lo_open) os << " (must be > " << spec.lo;
        else os << " (must be >= " << spec.lo;
        if (std::isfinite(spec.hi)) os << " and <= " << spec.hi;
        os << ")";
        throw ConfigError(os.str());
      }
      return v;
    }
    case Kind::text:
      if (!spec.choices.empty() && std::find(spec.choices.begin(), spec.choices.end(), raw) == spec.choices.end())
        throw ConfigError(name + ": unknown value '" + raw + "'");
      return raw;
  }
  return raw;
}

std::string format_value(const ConfigValue &v) {
  return std::visit(
      [](const auto &x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else if constexpr (std::is_same_v<T, long>) return std::to_string(x);
        else if constexpr (std::is_same_v<T, double>) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.17g", x);
          return buf;
        } else return x;
      },
      v);
}

}  // namespace

bool RunConfig::has(const std::string &section, const std::string &key) const {
  auto s = values.find(section);
  return s != values.end() && s->second.count(key) > 0;
}

double RunConfig::number(const std::string &section, const std::string &key, double fallback) const {
  if (!has(section, key)) return fallback;
  const auto &v = values.at(section).at(key);
  if (auto d = std::get_if<double>(&v)) return *d;
  if (auto l = std::get_if<long>(&v)) return static_cast<double>(*l);
  throw ConfigError(section + "." + key + " is not numeric");
}

long RunConfig::integer(const std::string &section, const std::string &key, long fallback) const {
  if (!has(section, key)) return fallback;
  const auto &v = values.at(section).at(key);
  if (auto l = std::get_if<long>(&v)) return *l;
  throw ConfigError(section + "." + key + " is not an integer");
}

bool RunConfig::flag(const std::string &section, const std::string &key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const auto &v = values.at(section).at(key);
  if (auto b = std::get_if<bool>(&v)) return *b;
  throw ConfigError(section + "." + key + " is not a flag");
}

std::string RunConfig::text(const std::string &section, const std::string &key,
                            const std::string &fallback) const {
  if (!has(section, key)) return fallback;
  const auto &v = values.at(section).at(key);
  if (auto s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError(section + "." + key + " is not text");
}

void RunConfig::set(const std::string &section, const std::string &key, const std::string &raw) {
  const KeySpec *spec = find_key(section, key);
  if (!spec) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
  values[section][key] = convert(*spec, raw);
}

RunConfig parse_config_text(const std::string &text, const std::string &source) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section = "run";
  int lineno = 0;
  auto fail = [&](int col, const std::string &msg) {
    throw ConfigError(source + ":" + std::to_string(lineno) + ":" + std::to_string(col) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = line;
    const auto hash = body.find_first_of("#;");
    if (hash != std::string::npos) body = body.substr(0, hash);
    const std::string t = trim(body);
    if (t.empty()) continue;
    const int col = static_cast<int>(body.find_first_not_of(" \t")) + 1;
    if (t.front() == '[') {
      if (t.back() != ']') fail(col, "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (std::find(section_order().begin(), section_order().end(), section) == section_order().end())
        fail(col + 1, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(col, "expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string raw = trim(body.substr(eq + 1));
    if (key.empty()) fail(col, "missing key");
    if (!find_key(section, key)) fail(col, "unknown key '" + key + "' in section [" + section + "]");
    if (cfg.has(section, key)) fail(col, "duplicate key '" + key + "'");
    try {
      cfg.set(section, key, raw);
    } catch (const ConfigError &e) {
      fail(static_cast<int>(eq) + 2, e.what());
    }
  }
  return cfg;
}

RunConfig parse_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string serialize_config(const RunConfig &cfg) {
  std::ostringstream os;
  bool first = true;
  for (const auto &sec : section_order()) {
    auto it = cfg.values.find(sec);
    if (it == cfg.values.end() || it->second.empty()) continue;
    if (!first) os << '\n';
    first = false;
    os << '[' << sec << "]\n";
    for (const auto &[k, v] : it->second) os << k << " = " << format_value(v) << '\n';
  }
  return os.str();
}

RunSetup make_run_setup(const RunConfig &cfg) {
  if (!cfg.has("run", "problem")) throw ConfigError("run.problem is required");
  const std::string name = cfg.text("run", "problem", "");
  RunSetup s;
  auto num = [&](const char *sec, const char *key, double &field) { field = cfg.number(sec, key, field); };

  WavePinningParams wp;
  for (auto [k, f] : std::initializer_list<std::pair<const char *, double *>>{
           {"R0", &wp.R0}, {"k0", &wp.k0}, {"gamma", &wp.gamma}, {"K", &wp.K}, {"delta", &wp.delta},
           {"s_l", &wp.s_l}, {"s_h", &wp.s_h}, {"sigma", &wp.sigma}, {"c0", &wp.c0}, {"D_cs", &wp.D_cs},
           {"D_c", &wp.D_c}, {"omega_factor", &wp.omega_factor}})
    num("wave_pinning", k, *f);
  LigandReceptorParams lr;
  for (auto [k, f] : std::initializer_list<std::pair<const char *, double *>>{
           {"k1", &lr.k1}, {"k_minus1", &lr.k_minus1}, {"epsilon", &lr.epsilon}, {"D_ls", &lr.D_ls},
           {"D_l", &lr.D_l}, {"N_R", &lr.N_R}, {"R_tilde0", &lr.R_tilde0}, {"R_outer", &lr.R_outer},
           {"beta", &lr.beta}, {"K_prot", &lr.K_prot}, {"upsilon", &lr.upsilon}, {"sigma_l", &lr.sigma_l},
           {"source_strength", &lr.source_strength}, {"trigger_distance", &lr.trigger_distance}})
    num("ligand", k, *f);
  StrychalskiParams sp;
  for (auto [k, f] : std::initializer_list<std::pair<const char *, double *>>{
           {"k1", &sp.k1}, {"k2", &sp.k2}, {"Km1", &sp.Km1}, {"Km2", &sp.Km2}, {"S", &sp.S}, {"D", &sp.D},
           {"u_bx", &sp.u_b.x}, {"u_by", &sp.u_b.y}})
    num("strychalski", k, *f);

  if (name == "wave_pinning") s.problem = problem_wave_pinning_stationary(wp);
  else if (name == "chemotaxis") s.problem = problem_chemotaxis(wp, lr);
  else if (name == "strychalski") s.problem = problem_strychalski(sp);
  else s.problem = make_problem(name);

  auto &p = s.problem;
  num("scheme", "dt", p.dt);
  num("scheme", "T", p.T);
  if (name == "strychalski" && !cfg.has("mesh", "star_h")) p.mesh.star_h = 4.0 * p.dt;
  auto &m = p.mesh;
  num("mesh", "radius", m.radius);
  m.n_boundary = static_cast<int>(cfg.integer("mesh", "n_boundary", m.n_boundary));
  num("mesh", "width_factor", m.width_factor);
  num("mesh", "star_h", m.star_h);
  num("mesh", "outer_radius", m.outer_radius);
  m.n_outer = static_cast<int>(cfg.integer("mesh", "n_outer", m.n_outer));
  num("mesh", "grading", m.grading);
  m.refine_levels = static_cast<int>(cfg.integer("mesh", "refine_levels", m.refine_levels));
  auto &mo = p.motion;
  num("motion", "curve_tau", mo.curve_tau);
  num("motion", "mmpde_tau", mo.mmpde_tau);
  num("motion", "extra_tangential_amplitude", mo.extra_tangential_amplitude);
  num("motion", "extra_tangential_frequency", mo.extra_tangential_frequency);

  const std::string scheme = cfg.text("scheme", "bulk_scheme", "");
  if (scheme == "crank_nicolson") p.scheme = BulkScheme::crank_nicolson;
  else if (scheme == "imex_euler") p.scheme = BulkScheme::imex_euler;

  s.scheme.dt = p.dt;
  s.scheme.T = p.T;
  s.scheme.bulk_scheme = p.scheme;
  num("scheme", "picard_tol", s.scheme.picard_tol);
  s.scheme.picard_max_iters = static_cast<int>(cfg.integer("scheme", "picard_max_iters", s.scheme.picard_max_iters));
  s.scheme.conservation_check = cfg.flag("scheme", "conservation_check", false);
  s.options.lag_ale_velocity = cfg.flag("scheme", "lag_ale_velocity", false);
  s.options.predictor_uses_previous = cfg.flag("scheme", "predictor_uses_previous", false);
  s.scheme.validate();
  s.out_dir = cfg.text("run", "out", s.out_dir);
  s.snapshot_every = static_cast<int>(cfg.integer("run", "snapshot_every", 0));
  return s;
}

namespace {

std::ofstream open_out(const std::string &path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path + "'");
  os << std::setprecision(17);
  return os;
}

void write_scalars(std::ostream &os, const std::vector<std::string> &names,
                   const std::vector<std::vector<double>> &fields, std::size_t n) {
  if (names.size() != fields.size()) throw std::invalid_argument("vtk: names and fields differ in count");
  if (fields.empty()) return;
  os << "POINT_DATA " << n << '\n';
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (fields[k].size() != n) throw std::invalid_argument("vtk: field length mismatch");
    os << "SCALARS " << names[k] << " double 1\nLOOKUP_TABLE default\n";
    for (double v : fields[k]) os << v << '\n';
  }
}

void check_stream(std::ostream &os, const std::string &path) {
  os.flush();
  if (!os) throw IoError("write failed for '" + path + "'");
}

}  // namespace

void write_vtk_bulk(const std::string &path, const std::vector<Vec2> &x,
                    const std::vector<std::array<int, 3>> &tri, const std::vector<std::string> &names,
                    const std::vector<std::vector<double>> &fields) {
  auto os = open_out(path);
  os << "# vtk DataFile Version 3.0\nmorphosim bulk\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << x.size() << " double\n";
  for (const auto &p : x) os << p.x << ' ' << p.y << " 0\n";
  os << "CELLS " << tri.size() << ' ' << 4 * tri.size() << '\n';
  for (const auto &t : tri) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << tri.size() << '\n';
  for (std::size_t i = 0; i < tri.size(); ++i) os << "5\n";
  write_scalars(os, names, fields, x.size());
  check_stream(os, path);
}

void write_vtk_curve(const std::string &path, const std::vector<Vec2> &x, const std::vector<std::string> &names,
                     const std::vector<std::vector<double>> &fields) {
  auto os = open_out(path);
  os << "# vtk DataFile Version 3.0\nmorphosim curve\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << x.size() << " double\n";
  for (const auto &p : x) os << p.x << ' ' << p.y << " 0\n";
  os << "CELLS 1 " << x.size() + 2 << '\n' << x.size() + 1;
  for (std::size_t i = 0; i < x.size(); ++i) os << ' ' << i;
  os << " 0\nCELL_TYPES 1\n4\n";
  write_scalars(os, names, fields, x.size());
  check_stream(os, path);
}

namespace {

std::vector<std::string> species_names(const char *prefix, int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(std::string(prefix) + std::to_string(i));
  return out;
}

int write_snapshot(const Simulation &sim, const std::string &dir) {
  const auto &st = sim.state();
  const auto &sys = sim.problem().system;
  char tag[32];
  std::snprintf(tag, sizeof tag, "%06d", st.step);
  write_vtk_bulk(dir + "/interior_" + tag + ".vtk", st.x_int, sim.interior_mesh().topo.triangles,
                 species_names("c", sys.n_c), st.c);
  if (const auto *ext = sim.exterior_mesh())
    write_vtk_bulk(dir + "/exterior_" + tag + ".vtk", st.x_ext, ext->topo.triangles,
                   species_names("l", sys.n_l), st.l);
  auto names = species_names("cs", sys.n_cs);
  auto ln = species_names("ls", sys.n_ls);
  names.insert(names.end(), ln.begin(), ln.end());
  auto fields = st.cs;
  fields.insert(fields.end(), st.ls.begin(), st.ls.end());
  write_vtk_curve(dir + "/curve_" + tag + ".vtk", st.curve.x, names, fields);
  return 1;
}

}  // namespace

RunSummary run_simulation(const RunSetup &setup, const std::string &config_echo, std::ostream &log) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(setup.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + setup.out_dir + "': " + ec.message());
  const std::string snap_dir = setup.out_dir + "/snapshots";
  if (setup.snapshot_every > 0) {
    fs::create_directories(snap_dir, ec);
    if (ec) throw IoError("cannot create '" + snap_dir + "'");
  }

  RunSummary sum;
  nlohmann::ordered_json manifest;
  manifest["software"] = "morphosim";
  manifest["version"] = kVersion;
  manifest["config"] = config_echo;
  manifest["problem"] = setup.problem.system.name;
  manifest["dt"] = setup.scheme.dt;
  manifest["T"] = setup.scheme.T;
  manifest["bulk_scheme"] = setup.scheme.bulk_scheme == BulkScheme::imex_euler ? "imex_euler" : "crank_nicolson";
  auto write_manifest = [&] {
    auto os = open_out(setup.out_dir + "/manifest.json");
    os << manifest.dump(2) << '\n';
    check_stream(os, setup.out_dir + "/manifest.json");
  };

  auto csv = open_out(setup.out_dir + "/diagnostics.csv");
  csv << kStepCsvHeader << '\n';
  const auto exact = setup.problem.system.exact;
  try {
    Simulation sim(setup.problem, setup.scheme, setup.options);
    manifest["mesh"] = {{"interior_nodes", sim.interior_mesh().node_count()},
                        {"interior_triangles", sim.interior_mesh().topo.triangles.size()},
                        {"curve_nodes", sim.state().curve.size()}};
    if (const auto *e = sim.exterior_mesh()) {
      manifest["mesh"]["exterior_nodes"] = e->node_count();
      manifest["mesh"]["exterior_triangles"] = e->topo.triangles.size();
    }
    write_step_row(csv, sim.initial_ledger(), sim.telemetry(), sim.state().cortex.lambda);
    if (setup.snapshot_every > 0) sum.snapshots += write_snapshot(sim, snap_dir);
    const int n = setup.scheme.steps();
    log << "morphosim " << kVersion << ": " << setup.problem.system.name << ", " << n << " steps of dt = "
        << setup.scheme.dt << '\n';
    try {
      for (int s = 0; s < n; ++s) {
        const auto rec = sim.advance();
        write_step_row(csv, rec.ledger, rec.telemetry, rec.lambda);
        sum.max_cons_err_rel = std::max(sum.max_cons_err_rel, rec.ledger.err_rel);
        sum.steps = s + 1;
        if (setup.snapshot_every > 0 && (s + 1) % setup.snapshot_every == 0)
          sum.snapshots += write_snapshot(sim, snap_dir);
      }
    } catch (const NumericalError &e) {
      sum.failure_stage = e.stage();
      sum.failure_message = e.what();
    }
    check_stream(csv, setup.out_dir + "/diagnostics.csv");
    if (exact && sum.failure_stage.empty()) {
      const double T = sim.state().time;
      const auto r = error_norms(sim.interior_mesh(), sim.state().x_int, sim.state().c[0],
                                 [&](const Vec2 &x) { return exact(x, T); });
      sum.L2 = r.L2;
      sum.Linf = r.Linf;
      manifest["error"] = {{"L2", r.L2}, {"Linf", r.Linf}, {"h", r.h}};
      log << std::setprecision(6) << "L2 error " << r.L2 << ", Linf error " << r.Linf << '\n';
    }
  } catch (const NumericalError &e) {
    sum.failure_stage = e.stage();
    sum.failure_message = e.what();
  }
  manifest["steps_completed"] = sum.steps;
  manifest["snapshots"] = sum.snapshots;
  manifest["max_cons_err_rel"] = sum.max_cons_err_rel;
  manifest["status"] = sum.failure_stage.empty() ? "ok" : "failed";
  if (!sum.failure_stage.empty()) {
    manifest["failure_stage"] = sum.failure_stage;
    manifest["failure_message"] = sum.failure_message;
  }
  write_manifest();
  log << std::setprecision(3) << "max relative conservation error " << sum.max_cons_err_rel << '\n';
  return sum;
}

}  // namespace morphosim
