#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "morphosim/curve.hpp"
#include "morphosim/diagnostics.hpp"
#include "morphosim/fem.hpp"
#include "morphosim/mesh.hpp"
#include "morphosim/model.hpp"

namespace morphosim {

struct SchemeConfig {
  double dt = 0.1;
  double T = 1.0;
  BulkScheme bulk_scheme = BulkScheme::crank_nicolson;
  double picard_tol = 1e-10;
  int picard_max_iters = 50;
  // Asserts column-sum identities and a vanishing boundary advection matrix every step.
  bool conservation_check = false;

  void validate() const;
  int steps() const;
};

struct StepperOptions {
  // Evaluate the t^n operators with the previous interval's mesh velocity
  // instead of the current one.
  bool lag_ale_velocity = false;
  // Replace the surface predictor by the previous surface values.
  bool predictor_uses_previous = false;
};

struct SystemState {
  double time = 0.0;
  int step = 0;
  std::vector<std::vector<double>> c, cs, l, ls;
  std::vector<Vec2> x_int, x_ext;  // physical node positions
  CurveState curve;
  CortexState cortex;
  std::vector<Vec2> w_int, w_ext, w_curve;  // mesh velocity of the last interval
};

struct StepRecord {
  MassLedger ledger;
  MeshTelemetry telemetry;
  double lambda = 0.0;
  int picard_iterations = 0;
  double picard_residual = 0.0;
  double boundary_advection = 0.0;  // largest |A_Gamma| entry seen this step
  double coupling_mismatch = 0.0;   // sum e^T R - sum e_s^T R_s at t^{n+1}
};

// Builds the meshes of a problem: disk or star interior, optional exterior annulus.
DomainPair build_meshes(const MeshSpec &spec);

class Simulation {
 public:
  Simulation(Problem problem, const SchemeConfig &scheme, const StepperOptions &options = {});
  Simulation(Problem problem, DomainPair meshes, const SchemeConfig &scheme,
             const StepperOptions &options = {});
  ~Simulation();
  Simulation(Simulation &&) noexcept;
  Simulation &operator=(Simulation &&) noexcept;

  StepRecord advance();

  const SystemState &state() const;
  const Problem &problem() const;
  const SchemeConfig &scheme() const;
  const BulkMesh &interior_mesh() const;
  const BulkMesh *exterior_mesh() const;
  const MassLedger &initial_ledger() const;
  MassLedger ledger() const;
  MeshTelemetry telemetry() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};


enum class RefinementMode { split, regenerate };

// Runs `levels` meshes derived from the problem's base mesh, either by
// uniform splitting or by regenerating with the boundary spacing halved,
// and tabulates the error of c^(1) at T against the exact solution.
ConvergenceTable convergence_study(const std::function<Problem()> &make_problem, int levels,
                                   RefinementMode mode, const SchemeConfig &scheme);

}  // namespace morphosim
