#pragma once

#include <cstdint>

namespace morphosim {

// Worst values seen over randomized moving meshes and velocity fields.
struct IdentityReport {
  int trials = 0;
  double stiffness = 0.0;          // max |column sum| / max |entry| of K
  double bulk_advection = 0.0;     // same for B
  double surface_stiffness = 0.0;  // K_s
  double surface_advection = 0.0;  // B_s
  double boundary_advection = 0.0; // max |A_Gamma| / max |B| with (w - u_Gamma) . n = 0
  double mass_partition = 0.0;     // |e^T M e - area| / area

  bool passed(double tol = 1e-13) const;
};

IdentityReport run_identity_suite(int trials, std::uint64_t seed);

}  // namespace morphosim
