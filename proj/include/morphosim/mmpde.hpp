#pragma once

#include <functional>
#include <vector>

#include "morphosim/fem.hpp"
#include "morphosim/mesh.hpp"

namespace morphosim {

struct MmpdeParams {
  double tau_hat = 1.0;
  double dt = 0.0;
  // Balancing p-hat as a function of the recovered a, b, c at a node; unset means 1.
  std::function<double(double a, double b, double c)> p_hat;
};

// Piecewise constant per element; the monitor is identically one so d = e = 0.
struct MmpdeCoefficients {
  std::vector<double> a, b, c, d, e, J;
};

struct NodalCoefficients {
  std::vector<double> a, b, c, d, e;
};

MmpdeCoefficients compute_coefficients(const Triangulation &comp, const std::vector<Vec2> &phys);
// Area-weighted patch average of element values at every node.
std::vector<double> recover_field(const Triangulation &comp, const std::vector<double> &elem);
NodalCoefficients recover_coefficients(const MmpdeCoefficients &coeffs, const Triangulation &comp);

// Smallest ratio of physical to computational element area (the map Jacobian).
double min_jacobian(const Triangulation &comp, const std::vector<Vec2> &phys);

// Backward Euler step of the mesh PDE with explicit coefficients. Every
// boundary-loop node must appear in dirichlet_nodes.
std::vector<Vec2> mmpde_step(const BulkMesh &comp, const std::vector<Vec2> &phys,
                             const std::vector<int> &dirichlet_nodes,
                             const std::vector<Vec2> &dirichlet_values, const MmpdeParams &params);

// Outer-loop Dirichlet data of the exterior mesh shifted with the cell.
std::vector<Vec2> translate_exterior_frame(const Triangulation &exterior,
                                           const std::vector<Vec2> &phys, const Vec2 &shift);

}  // namespace morphosim
