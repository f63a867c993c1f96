#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "morphosim/app.hpp"
#include "morphosim/verify.hpp"

using namespace morphosim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

int cmd_run(const std::string &config_path, const std::string &out) {
  const RunConfig cfg = parse_config(config_path);
  RunSetup setup = make_run_setup(cfg);
  if (!out.empty()) setup.out_dir = out;
  const auto sum = run_simulation(setup, serialize_config(cfg), std::cout);
  if (!sum.failure_stage.empty()) {
    std::cerr << "error [" << sum.failure_stage << "] at step " << sum.steps + 1 << ": " << sum.failure_message
              << '\n';
    return kExitNumerical;
  }
  return 0;
}

int cmd_convergence(const std::string &problem, int levels, const std::string &mode, int base_boundary,
                    const std::string &out) {
  if (levels < 1) throw ConfigError("--levels must be at least 1");
  auto make = [&] {
    Problem p = make_problem(problem);
    if (base_boundary > 0) p.mesh.n_boundary = base_boundary;
    return p;
  };
  const Problem p0 = make();
  SchemeConfig sc;
  sc.dt = p0.dt;
  sc.T = p0.T;
  sc.bulk_scheme = p0.scheme;
  const auto table =
      convergence_study(make, levels, mode == "regenerate" ? RefinementMode::regenerate : RefinementMode::split, sc);
  write_convergence_csv(std::cout, table);
  if (!out.empty()) {
    std::ofstream os(out);
    if (!os) throw IoError("cannot write '" + out + "'");
    write_convergence_csv(os, table);
    if (!os) throw IoError("write failed for '" + out + "'");
  }
  return 0;
}

int cmd_verify(int trials, std::uint64_t seed) {
  const auto r = run_identity_suite(trials, seed);
  std::cout << "trials " << r.trials << "\n"
            << "stiffness column sums        " << r.stiffness << "\n"
            << "bulk advection column sums   " << r.bulk_advection << "\n"
            << "surface stiffness col sums   " << r.surface_stiffness << "\n"
            << "surface advection col sums   " << r.surface_advection << "\n"
            << "boundary advection magnitude " << r.boundary_advection << "\n"
            << "mass partition of unity      " << r.mass_partition << "\n";
  const bool ok = r.passed();
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"morphosim: mass-conservative bulk-surface reaction-diffusion on evolving domains"};
  app.require_subcommand(1);

  std::string config, out;
  auto *run = app.add_subcommand("run", "Run a configured simulation");
  run->add_option("--config", config, "Configuration file")->required();
  run->add_option("--out", out, "Output directory (overrides run.out)");

  std::string problem, mode = "split", table_out;
  int levels = 4, base = 0;
  auto *conv = app.add_subcommand("convergence", "Spatial convergence study against the exact solution");
  conv->add_option("--problem", problem, "moving_diffusion or moving_advection_diffusion")->required();
  conv->add_option("--levels", levels, "Number of mesh levels");
  conv->add_option("--mode", mode, "split or regenerate")->check(CLI::IsMember({"split", "regenerate"}));
  conv->add_option("--base-boundary", base, "Boundary nodes of the coarsest mesh");
  conv->add_option("--out", table_out, "Write the table to this CSV file");

  int trials = 100;
  std::uint64_t seed = 1;
  auto *ver = app.add_subcommand("verify", "Operator identity suite on randomized moving meshes");
  ver->add_option("--trials", trials, "Number of random meshes");
  ver->add_option("--seed", seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, out);
    if (*conv) return cmd_convergence(problem, levels, mode, base, table_out);
    if (*ver) return cmd_verify(trials, seed);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError &e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericalError &e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
