#pragma once

#include <functional>
#include <vector>

#include "morphosim/core.hpp"
#include "morphosim/mesh.hpp"

namespace morphosim {

// Closed polygonal membrane on a uniform parameter grid sigma_i = i/N.
struct CurveState {
  std::vector<Vec2> x;
  std::vector<Vec2> normal;    // outward unit normal
  std::vector<Vec2> tangent;   // unit tangent along the CCW traversal
  std::vector<double> kappa;   // +1/R on a circle
  std::vector<double> speed;   // |x_sigma|

  int size() const { return static_cast<int>(x.size()); }
  double sigma_spacing() const { return 1.0 / static_cast<double>(x.size()); }
};

// Recomputes normals, tangents and curvature from central differences.
void geometry_update(CurveState &curve);
CurveState make_curve(std::vector<Vec2> points);
CurveState extract_curve(const Triangulation &tri);

double curve_area(const CurveState &curve);
double curve_perimeter(const CurveState &curve);
// Largest over smallest segment length.
double equidistribution_ratio(const CurveState &curve);

using NodeField = std::function<double(int node, const Vec2 &x, double t)>;

// V = alpha*kappa + beta.
struct NormalVelocityLaw {
  NodeField alpha;
  NodeField beta;
};

struct CurveMotionParams {
  double tau = 1.0;  // tangential relaxation time
  double dt = 0.0;
  // Prescribed tangential speed along t added to the redistribution term.
  NodeField tangential;
};

// One semi-implicit backward Euler step. Geometry and the law are frozen at
// time t; the second differences are implicit.
CurveState evolve_curve(const CurveState &curve, const NormalVelocityLaw &law,
                        const CurveMotionParams &params, double t);

struct CortexState {
  double lambda = 0.0;
  double lambda0 = 0.0;
  double A0 = 0.0;
  double upsilon = 1.0;
  double beta_relax = 0.0;
};

double cortical_tension_rate(const CortexState &cortex, double A, double dA_dt);
// Explicit Euler, clamped at zero.
CortexState cortical_tension_step(const CortexState &cortex, double A, double dA_dt, double dt);

// V = K_prot*c_s - lambda*kappa with c_s given per curve node.
NormalVelocityLaw membrane_velocity_law(std::vector<double> c_s, const CortexState &cortex,
                                        double k_prot);

}  // namespace morphosim
