#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "morphosim/curve.hpp"
#include "morphosim/mesh.hpp"
#include "morphosim/sparse.hpp"

namespace morphosim {

// Fixed connectivity of a bulk triangulation plus the sparsity slots used by
// every P1 operator assembled on it. Positions are supplied per call.
struct BulkMesh {
  Triangulation topo;  // computational mesh
  std::shared_ptr<const SparsityPattern> pattern;
  std::vector<std::array<int, 9>> slots;           // element (a,b) -> slot a*3+b
  std::vector<std::array<int, 4>> loop_slots;      // inner loop segment (i,i+1)

  int node_count() const { return static_cast<int>(topo.nodes.size()); }
};

BulkMesh make_bulk_mesh(Triangulation topo);

// Periodic P1 structure of the closed curve.
struct CurveMesh {
  int n = 0;
  std::shared_ptr<const SparsityPattern> pattern;
  std::vector<std::array<int, 4>> seg_slots;
};

CurveMesh make_curve_mesh(int n);

struct AleFrame {
  std::vector<Vec2> positions_prev;
  std::vector<Vec2> positions_next;
  double dt = 0.0;
  std::vector<Vec2> w;
};

AleFrame make_ale_frame(std::vector<Vec2> prev, std::vector<Vec2> next, double dt);

SparseMatrix assemble_mass(const BulkMesh &m, const std::vector<Vec2> &x);
SparseMatrix assemble_stiffness(const BulkMesh &m, const std::vector<Vec2> &x, double D);
// B[nu][mu] = int phi_mu (w - u) . grad phi_nu, with rel = w - u nodal.
SparseMatrix assemble_advection_bulk(const BulkMesh &m, const std::vector<Vec2> &x,
                                     const std::vector<Vec2> &rel);
inline SparseMatrix assemble_advection_bulk(const BulkMesh &m, const std::vector<Vec2> &x,
                                            const std::vector<Vec2> &w,
                                            const std::vector<Vec2> &u) {
  std::vector<Vec2> rel(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) rel[i] = w[i] - u[i];
  return assemble_advection_bulk(m, x, rel);
}

// A[nu][mu] = int_Gamma phi_mu g phi_nu ds over the inner loop with g the
// P1 interpolant of the nodal values g_n (one per loop node).
SparseMatrix assemble_boundary_advection(const BulkMesh &m, const std::vector<Vec2> &x,
                                         const std::vector<double> &g_n);
// g = orientation * (w - u_Gamma) . n at each curve node.
SparseMatrix assemble_boundary_advection(const BulkMesh &m, const CurveState &curve,
                                         const std::vector<Vec2> &w_curve,
                                         const std::vector<Vec2> &u_gamma, double orientation);

struct SurfaceOperators {
  SparseMatrix M;
  SparseMatrix K;  // unit diffusivity; scale per species
  SparseMatrix B;
};

// B[nu][mu] = int d/ds(phi_mu g) phi_nu ds with g the P1 interpolant of g_t.
SurfaceOperators assemble_surface_operators(const CurveMesh &cm, const std::vector<Vec2> &x,
                                            const std::vector<double> &g_t);
SurfaceOperators assemble_surface_operators(const CurveMesh &cm, const CurveState &curve,
                                            const std::vector<Vec2> &w_curve,
                                            const std::vector<Vec2> &u_gamma);

// Triangle quadrature on barycentric coordinates; weights sum to 1.
struct TriangleRule {
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weight;
};
const TriangleRule &triangle_rule(int degree);  // degree 2 (3 points) or 5 (7 points)

struct QuadratureSpec {
  int degree = 2;
  // Optional uniform subdivision depth per element from its vertex positions.
  std::function<int(const Vec2 &, const Vec2 &, const Vec2 &)> subdivisions;
};

// Degree-5 rule that subdivides elements near a Gaussian of standard
// deviation `width` centred at center() until the Gaussian is resolved.
QuadratureSpec gaussian_source_quadrature(std::function<Vec2()> center, double width);

// Vector kinetics at a point: s holds m species values; f receives m values
// and, when jac is non-null, df_p/ds_q at jac[p*m+q].
using PointKinetics = std::function<void(const Vec2 &x, const double *s, double *f, double *jac)>;

struct LoadSet {
  std::vector<std::vector<double>> F;  // m vectors
  std::vector<SparseMatrix> J;         // m*m blocks int (df_p/ds_q) phi phi, if requested
};

LoadSet assemble_bulk_load(const BulkMesh &m, const std::vector<Vec2> &x,
                           const std::vector<const std::vector<double> *> &fields,
                           const PointKinetics &kin, const QuadratureSpec &q, bool jacobian);

// Scalar source without species dependence.
std::vector<double> assemble_load(const BulkMesh &m, const std::vector<Vec2> &x,
                                  const std::function<double(const Vec2 &)> &f,
                                  const QuadratureSpec &q = {});
std::vector<double> assemble_surface_load(const CurveMesh &cm, const std::vector<Vec2> &x,
                                          const std::function<double(const Vec2 &)> &f);

// Membrane coupling evaluated at 2-point Gauss nodes of each curve segment.
// Inputs: nb bulk traces, ns surface values, ne extra surface values.
// Outputs: nb bulk inflow fluxes, ns surface sink rates, and optionally
// d(bulk flux)/d(bulk trace) at dbulk[p*nb+q].
using CouplingKinetics = std::function<void(const Vec2 &x, const double *bulk, const double *surf,
                                            const double *extra, double *bulk_out,
                                            double *surf_out, double *dbulk)>;

struct CouplingSet {
  std::vector<std::vector<double>> bulk;  // nb vectors over bulk nodes
  std::vector<std::vector<double>> surf;  // ns vectors over curve nodes
  std::vector<SparseMatrix> J;            // nb*nb blocks on the bulk pattern, if requested
};

// `bulk` fields are full bulk vectors, traced through the inner loop.
CouplingSet assemble_coupling(const BulkMesh &m, const std::vector<Vec2> &x,
                              const std::vector<const std::vector<double> *> &bulk,
                              const std::vector<const std::vector<double> *> &surf,
                              const std::vector<const std::vector<double> *> &extra,
                              const CouplingKinetics &kin, bool jacobian);

// Nodal material velocity of the discrete membrane: normal part from the
// mesh motion, tangential part from the material law.
std::vector<Vec2> membrane_velocity(const CurveState &curve, const std::vector<Vec2> &w_curve,
                                    const std::vector<double> &material_tangential);

}  // namespace morphosim
