#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "morphosim/curve.hpp"
#include "morphosim/fem.hpp"
#include "morphosim/mesh.hpp"
#include "morphosim/stepper.hpp"

using namespace morphosim;

namespace {

BulkMesh unit_triangle() {
  return make_bulk_mesh(Triangulation{{{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, {0, 1, 2}, {}});
}

BulkMesh disk(int n, double R = 1.0) {
  return make_bulk_mesh(generate_circle_mesh(R, n, 2.0 * kPi * R / n));
}

double column_ratio(const SparseMatrix &A) {
  double m = 0.0;
  for (double s : A.column_sums()) m = std::max(m, std::abs(s));
  return m / A.max_abs();
}

double symmetry_defect(const SparseMatrix &A) {
  const auto d = A.dense();
  double m = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j) m = std::max(m, std::abs(d[i][j] - d[j][i]));
  return m / A.max_abs();
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

}  // namespace

TEST(Mass, SingleTriangleClosedForm) {
  const auto m = unit_triangle();
  const auto M = assemble_mass(m, m.topo.nodes);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(M.at(i, j), (i == j ? 2.0 : 1.0) / 24.0, 1e-16);
}

TEST(Mass, PartitionOfUnityMatchesPolygonArea) {
  for (int n : {12, 40, 87}) {
    const auto m = disk(n);
    const auto M = assemble_mass(m, m.topo.nodes);
    const double poly = 0.5 * n * std::sin(2.0 * kPi / n);
    EXPECT_NEAR(M.sum(), poly, 1e-12 * poly);
    EXPECT_LT(symmetry_defect(M), 1e-15);
  }
}

TEST(Stiffness, SingleTriangleClosedForm) {
  const auto m = unit_triangle();
  const auto K = assemble_stiffness(m, m.topo.nodes, 1.0);
  const double ref[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(K.at(i, j), ref[i][j], 1e-16);
}

TEST(Stiffness, LinearFieldIsDiscretelyHarmonic) {
  const auto m = disk(30);
  const auto K = assemble_stiffness(m, m.topo.nodes, 2.5);
  std::vector<double> x(m.node_count());
  for (int i = 0; i < m.node_count(); ++i) x[i] = 3.0 * m.topo.nodes[i].x - m.topo.nodes[i].y;
  const auto Kx = K.multiply(x);
  std::vector<char> bnd(m.node_count(), 0);
  for (int i : m.topo.inner_loop) bnd[i] = 1;
  for (int i = 0; i < m.node_count(); ++i)
    if (!bnd[i]) EXPECT_NEAR(Kx[i], 0.0, 1e-12);
  EXPECT_LT(column_ratio(K), 1e-13);
  EXPECT_LT(symmetry_defect(K), 1e-15);
}

TEST(BulkAdvection, VanishesInLagrangianLimit) {
  const auto m = disk(20);
  std::vector<Vec2> w(m.node_count(), {0.3, -0.2});
  EXPECT_EQ(assemble_advection_bulk(m, m.topo.nodes, w, w).max_abs(), 0.0);
}

TEST(BulkAdvection, SingleTriangleMatchesGaussOracle) {
  const auto m = unit_triangle();
  const std::vector<Vec2> rel(3, {1.0, 0.0});
  const auto B = assemble_advection_bulk(m, m.topo.nodes, rel);
  // grad phi on the unit triangle and the 3-point edge-midpoint rule.
  const Vec2 grad[3] = {{-1, -1}, {1, 0}, {0, 1}};
  const double q[3][3] = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
  for (int nu = 0; nu < 3; ++nu)
    for (int mu = 0; mu < 3; ++mu) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += 0.5 / 3.0 * q[k][mu] * dot(rel[0], grad[nu]);
      EXPECT_NEAR(B.at(nu, mu), s, 1e-16);
    }
}

TEST(BulkAdvection, ZeroColumnSumsOnDeformedMeshes) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto m = disk(24);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec2> x = m.topo.nodes, w(x.size()), um(x.size());
    const double shear = 0.2 * u(rng);
    for (auto &p : x) p = Vec2{p.x + shear * p.y, p.y} + 0.01 * Vec2{u(rng), u(rng)};
    for (std::size_t i = 0; i < x.size(); ++i) w[i] = {u(rng), u(rng)}, um[i] = {u(rng), u(rng)};
    EXPECT_LT(column_ratio(assemble_advection_bulk(m, x, w, um)), 1e-13);
    EXPECT_LT(column_ratio(assemble_stiffness(m, x, 0.7)), 1e-13);
  }
}

TEST(BoundaryAdvection, UnitNormalFluxGivesPerimeter) {
  const int n = 50;
  const auto m = disk(n);
  const auto A = assemble_boundary_advection(m, m.topo.nodes, std::vector<double>(n, 1.0));
  EXPECT_NEAR(A.sum(), n * 2.0 * std::sin(kPi / n), 1e-12);
  EXPECT_LT(symmetry_defect(A), 1e-15);
  // Only membrane rows and columns are populated.
  std::vector<char> bnd(m.node_count(), 0);
  for (int i : m.topo.inner_loop) bnd[i] = 1;
  const auto d = A.dense();
  for (int i = 0; i < m.node_count(); ++i)
    for (int j = 0; j < m.node_count(); ++j)
      if (!bnd[i] || !bnd[j]) EXPECT_EQ(d[i][j], 0.0);
}

TEST(BoundaryAdvection, TangentialSlipDoesNotContribute) {
  const auto m = disk(30);
  const auto curve = extract_curve(m.topo);
  std::vector<Vec2> w(curve.size()), ug(curve.size());
  for (int i = 0; i < curve.size(); ++i) {
    w[i] = 0.4 * curve.normal[i] + 1.3 * curve.tangent[i];
    ug[i] = 0.4 * curve.normal[i] - 0.7 * curve.tangent[i];
  }
  EXPECT_LT(assemble_boundary_advection(m, curve, w, ug, 1.0).max_abs(), 1e-14);
  EXPECT_LT(assemble_boundary_advection(m, curve, w, membrane_velocity(curve, w, {}), -1.0).max_abs(), 1e-14);
}

TEST(SurfaceOperators, SquareLoopClosedForms) {
  const double h = 0.5;
  const std::vector<Vec2> sq{{0, 0}, {h, 0}, {h, h}, {0, h}};
  const auto cm = make_curve_mesh(4);
  const auto s = assemble_surface_operators(cm, sq, std::vector<double>(4, 0.0));
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(s.M.at(i, i), 2.0 * h / 3.0, 1e-15);
    EXPECT_NEAR(s.M.at(i, (i + 1) % 4), h / 6.0, 1e-15);
    EXPECT_NEAR(s.K.at(i, i), 2.0 / h, 1e-14);
    EXPECT_NEAR(s.K.at(i, (i + 1) % 4), -1.0 / h, 1e-14);
    EXPECT_EQ(s.M.at(i, (i + 2) % 4), 0.0);
  }
  EXPECT_EQ(s.B.max_abs(), 0.0);
}

TEST(SurfaceOperators, ClosedCurveColumnSumsVanish) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 40 + trial;
    std::vector<Vec2> x(n);
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) {
      const double th = 2.0 * kPi * i / n;
      const double r = 1.0 + 0.3 * std::sin(4.0 * th) + 0.02 * u(rng);
      x[i] = r * Vec2{std::cos(th), std::sin(th)};
      g[i] = u(rng);
    }
    const auto s = assemble_surface_operators(make_curve_mesh(n), x, g);
    EXPECT_LT(column_ratio(s.B), 1e-13);
    EXPECT_LT(column_ratio(s.K), 1e-13);
    EXPECT_NEAR(s.M.sum(), polygon_perimeter(x), 1e-13);
  }
}

TEST(Quadrature, DegreeFiveRuleIsExact) {
  const auto &r = triangle_rule(5);
  double wsum = 0.0;
  for (double w : r.weight) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-15);
  for (int a = 0; a <= 5; ++a)
    for (int b = 0; a + b <= 5; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < r.weight.size(); ++k)
        s += 0.5 * r.weight[k] * std::pow(r.bary[k][1], a) * std::pow(r.bary[k][2], b);
      EXPECT_NEAR(s, factorial(a) * factorial(b) / factorial(a + b + 2), 1e-15) << a << "," << b;
    }
  EXPECT_THROW(triangle_rule(6), std::invalid_argument);
}

TEST(Load, ConstantAndLinearSources) {
  const auto m = unit_triangle();
  const auto F1 = assemble_load(m, m.topo.nodes, [](const Vec2 &) { return 1.0; });
  for (double v : F1) EXPECT_NEAR(v, 1.0 / 6.0, 1e-16);
  const auto Fx = assemble_load(m, m.topo.nodes, [](const Vec2 &p) { return p.x; });
  EXPECT_NEAR(Fx[0] + Fx[1] + Fx[2], 1.0 / 6.0, 1e-16);
}

TEST(Load, KineticsLoadAndJacobianMatchMass) {
  const auto m = disk(20);
  std::vector<double> c(m.node_count());
  for (int i = 0; i < m.node_count(); ++i) c[i] = 1.0 + m.topo.nodes[i].x;
  PointKinetics lin = [](const Vec2 &, const double *s, double *f, double *jac) {
    f[0] = 2.0 * s[0];
    if (jac) jac[0] = 2.0;
  };
  const auto L = assemble_bulk_load(m, m.topo.nodes, {&c}, lin, {}, true);
  const auto M = assemble_mass(m, m.topo.nodes);
  const auto Mc = M.multiply(c);
  for (int i = 0; i < m.node_count(); ++i) EXPECT_NEAR(L.F[0][i], 2.0 * Mc[i], 1e-15);
  EXPECT_NEAR(SparseMatrix::combine(1.0, L.J[0], -2.0, M).max_abs(), 0.0, 1e-15);
}

TEST(Load, GaussianSourceOverAnnulus) {
  MeshSpec spec;
  spec.radius = 5.0;
  spec.n_boundary = 101;
  spec.width_factor = 0.95;
  spec.exterior = true;
  const auto d = build_meshes(spec);
  const auto m = make_bulk_mesh(*d.exterior);
  const double sigma = 0.5;
  const Vec2 src{15.0, 0.0};
  auto f = [&](const Vec2 &p) {
    const Vec2 r = p - src;
    return 10.0 * std::exp(-dot(r, r) / (2.0 * sigma));
  };
  const auto F = assemble_load(m, m.topo.nodes, f, gaussian_source_quadrature([src] { return src; }, std::sqrt(sigma)));
  double total = 0.0;
  for (double v : F) total += v;
  // The Gaussian sits far from both boundaries, so the whole-plane integral applies.
  const double exact = 10.0 * 2.0 * kPi * sigma;
  EXPECT_NEAR(total, exact, 0.01 * exact);
  // The plain degree-2 rule badly under-resolves it on the graded mesh.
  const auto Fc = assemble_load(m, m.topo.nodes, f);
  double coarse = 0.0;
  for (double v : Fc) coarse += v;
  EXPECT_GT(std::abs(coarse - exact), std::abs(total - exact));
}

TEST(Coupling, BulkAndSurfaceLedgersAgree) {
  const auto m = disk(30);
  const auto curve = extract_curve(m.topo);
  std::vector<double> c(m.node_count()), cs(curve.size());
  for (int i = 0; i < m.node_count(); ++i) c[i] = 1.0 + 0.3 * m.topo.nodes[i].y;
  for (int i = 0; i < curve.size(); ++i) cs[i] = 0.5 + 0.1 * std::cos(3.0 * i);
  CouplingKinetics k = [](const Vec2 &, const double *b, const double *s, const double *, double *bo,
                          double *so, double *db) {
    const double r = b[0] * b[0] - s[0];
    bo[0] = -r;
    so[0] = -r;
    if (db) db[0] = -2.0 * b[0];
  };
  const auto cp = assemble_coupling(m, m.topo.nodes, {&c}, {&cs}, {}, k, true);
  double eb = 0.0, es = 0.0;
  for (double v : cp.bulk[0]) eb += v;
  for (double v : cp.surf[0]) es += v;
  EXPECT_NEAR(eb, es, 1e-14 * std::abs(eb));
  ASSERT_EQ(cp.J.size(), 1u);
  EXPECT_LT(symmetry_defect(cp.J[0]), 1e-15);
}

TEST(AleFrame, VelocityIsDisplacementOverStep) {
  const auto f = make_ale_frame({{0, 0}, {1, 1}}, {{0.5, 0}, {1, 0.25}}, 0.25);
  EXPECT_EQ(f.w[0], (Vec2{2.0, 0.0}));
  EXPECT_EQ(f.w[1], (Vec2{0.0, -3.0}));
  EXPECT_THROW(make_ale_frame({{0, 0}}, {}, 0.1), std::invalid_argument);
}

TEST(MembraneVelocity, NormalFromMeshTangentialFromMaterial) {
  const auto curve = make_curve(loop_points(generate_circle_mesh(1.0, 16, 0.4), generate_circle_mesh(1.0, 16, 0.4).inner_loop));
  std::vector<Vec2> w(16, {0.7, -0.2});
  std::vector<double> mt(16, 0.3);
  const auto u = membrane_velocity(curve, w, mt);
  for (int i = 0; i < 16; ++i) {
    EXPECT_NEAR(dot(u[i] - w[i], curve.normal[i]), 0.0, 1e-15);
    EXPECT_NEAR(dot(u[i], curve.tangent[i]), 0.3, 1e-15);
  }
}

TEST(Assembly, ReassemblyIsBitwiseIdentical) {
  const auto m = disk(25);
  std::vector<Vec2> w(m.node_count(), {0.1, 0.2});
  std::vector<Vec2> zero(m.node_count());
  EXPECT_EQ(assemble_mass(m, m.topo.nodes).values(), assemble_mass(m, m.topo.nodes).values());
  EXPECT_EQ(assemble_stiffness(m, m.topo.nodes, 1.0).values(), assemble_stiffness(m, m.topo.nodes, 1.0).values());
  EXPECT_EQ(assemble_advection_bulk(m, m.topo.nodes, w, zero).values(),
            assemble_advection_bulk(m, m.topo.nodes, w, zero).values());
}
