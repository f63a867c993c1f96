#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "morphosim/stepper.hpp"

namespace morphosim {

using ConfigValue = std::variant<bool, long, double, std::string>;

// Flat `key = value` file with `[section]` headers. Keys before the first
// header belong to [run]. Values are checked against a fixed schema.
struct RunConfig {
  std::map<std::string, std::map<std::string, ConfigValue>> values;

  bool has(const std::string &section, const std::string &key) const;
  double number(const std::string &section, const std::string &key, double fallback) const;
  long integer(const std::string &section, const std::string &key, long fallback) const;
  bool flag(const std::string &section, const std::string &key, bool fallback) const;
  std::string text(const std::string &section, const std::string &key, const std::string &fallback) const;

  void set(const std::string &section, const std::string &key, const std::string &raw);
};

RunConfig parse_config_text(const std::string &text, const std::string &source = "<config>");
RunConfig parse_config(const std::string &path);
// Canonical form: schema section order, sorted keys, numbers at full precision.
std::string serialize_config(const RunConfig &cfg);

struct RunSetup {
  Problem problem;
  SchemeConfig scheme;
  StepperOptions options;
  std::string out_dir = "morphosim_out";
  int snapshot_every = 0;  // 0 writes no snapshots
};

RunSetup make_run_setup(const RunConfig &cfg);

// Legacy ASCII VTK: triangles with one point scalar per species.
void write_vtk_bulk(const std::string &path, const std::vector<Vec2> &x,
                    const std::vector<std::array<int, 3>> &triangles,
                    const std::vector<std::string> &names,
                    const std::vector<std::vector<double>> &fields);
// Closed polyline through the membrane nodes with the surface species.
void write_vtk_curve(const std::string &path, const std::vector<Vec2> &x,
                     const std::vector<std::string> &names,
                     const std::vector<std::vector<double>> &fields);

struct RunSummary {
  int steps = 0;
  int snapshots = 0;
  double max_cons_err_rel = 0.0;
  double L2 = -1.0, Linf = -1.0;  // negative when no exact solution exists
  std::string failure_stage;      // empty on success
  std::string failure_message;
};

// Runs to T writing diagnostics.csv, snapshots and manifest.json into out_dir.
// Numerical failures are caught, recorded in the summary and the manifest.
RunSummary run_simulation(const RunSetup &setup, const std::string &config_echo, std::ostream &log);

extern const char *const kVersion;

}  // namespace morphosim
