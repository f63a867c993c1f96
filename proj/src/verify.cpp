#include "morphosim/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "morphosim/curve.hpp"
#include "morphosim/fem.hpp"
#include "morphosim/mesh.hpp"

namespace morphosim {

bool IdentityReport::passed(double tol) const {
  return stiffness < tol && bulk_advection < tol && surface_stiffness < tol && surface_advection < tol &&
         boundary_advection < tol && mass_partition < tol;
}

namespace {

double column_ratio(const SparseMatrix &A) {
  const double scale = A.max_abs();
  if (!(scale > 0.0)) return 0.0;
  double m = 0.0;
  for (double s : A.column_sums()) m = std::max(m, std::abs(s));
  return m / scale;
}

}  // namespace

IdentityReport run_identity_suite(int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> nb(12, 40);
  IdentityReport rep;
  for (int k = 0; k < trials; ++k) {
    const double R = 0.5 + 2.0 * std::abs(u(rng));
    const int n = nb(rng);
    const auto tri = generate_circle_mesh(R, n, 2.0 * kPi * R / n);
    const BulkMesh m = make_bulk_mesh(tri);
    // Random smooth deformation plus a small nodal jitter keeps every element valid.
    const double a = 0.2 * u(rng), b = 0.2 * u(rng), c = 0.2 * u(rng), d = 0.2 * u(rng);
    const Vec2 shift{u(rng), u(rng)};
    const double h = 2.0 * kPi * R / n;
    std::vector<Vec2> x(tri.nodes.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const Vec2 &p = tri.nodes[i];
      x[i] = Vec2{p.x + a * p.x + b * p.y, p.y + c * p.x + d * p.y} + shift;
      x[i] += 0.05 * h * Vec2{u(rng), u(rng)};
    }
    std::vector<Vec2> w(x.size()), um(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      w[i] = {u(rng), u(rng)};
      um[i] = {u(rng), u(rng)};
    }
    const double D = 0.01 + std::abs(u(rng));
    rep.stiffness = std::max(rep.stiffness, column_ratio(assemble_stiffness(m, x, D)));
    const SparseMatrix B = assemble_advection_bulk(m, x, w, um);
    rep.bulk_advection = std::max(rep.bulk_advection, column_ratio(B));

    double area = 0.0;
    for (const auto &t : tri.triangles) area += 0.5 * cross(x[t[1]] - x[t[0]], x[t[2]] - x[t[0]]);
    const SparseMatrix M = assemble_mass(m, x);
    rep.mass_partition = std::max(rep.mass_partition, std::abs(M.sum() - area) / area);

    const CurveState curve = make_curve(loop_points(Triangulation{x, tri.triangles, tri.inner_loop, {}},
                                                    tri.inner_loop));
    const CurveMesh cm = make_curve_mesh(curve.size());
    std::vector<Vec2> wc(curve.size());
    std::vector<double> mt(curve.size());
    for (int i = 0; i < curve.size(); ++i) {
      wc[i] = w[tri.inner_loop[i]];
      mt[i] = u(rng);
    }
    const auto ug = membrane_velocity(curve, wc, mt);
    const auto s = assemble_surface_operators(cm, curve, wc, ug);
    rep.surface_stiffness = std::max(rep.surface_stiffness, column_ratio(s.K));
    rep.surface_advection = std::max(rep.surface_advection, column_ratio(s.B));
    const SparseMatrix A = assemble_boundary_advection(m, curve, wc, ug, 1.0);
    rep.boundary_advection = std::max(rep.boundary_advection, A.max_abs() / std::max(B.max_abs(), 1e-300));
    ++rep.trials;
  }
  return rep;
}

}  // namespace morphosim
