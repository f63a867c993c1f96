#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "morphosim/mesh.hpp"
#include "morphosim/mmpde.hpp"

using namespace morphosim;

namespace {

Triangulation unit_disk(int n) { return generate_circle_mesh(1.0, n, 2.0 * kPi / n); }

// Structured grid on [0,1]^2 split along one diagonal; cell (i,j) owns triangles 2k, 2k+1.
Triangulation grid(int n) {
  Triangulation t;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) t.nodes.push_back({double(i) / n, double(j) / n});
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      t.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      t.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return t;
}

double max_dist(const std::vector<Vec2> &a, const std::vector<Vec2> &b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, norm(a[i] - b[i]));
  return m;
}

std::vector<Vec2> loop_values(const Triangulation &t, const std::vector<Vec2> &x) {
  std::vector<Vec2> v;
  for (int i : t.inner_loop) v.push_back(x[i]);
  return v;
}

}  // namespace

TEST(MmpdeCoefficients, IdentityMap) {
  const auto t = unit_disk(20);
  const auto c = compute_coefficients(t, t.nodes);
  for (std::size_t e = 0; e < t.triangles.size(); ++e) {
    EXPECT_NEAR(c.a[e], 1.0, 1e-14);
    EXPECT_NEAR(c.b[e], 0.0, 1e-14);
    EXPECT_NEAR(c.c[e], 1.0, 1e-14);
    EXPECT_EQ(c.d[e], 0.0);
    EXPECT_EQ(c.e[e], 0.0);
    EXPECT_NEAR(c.J[e], 1.0, 1e-14);
  }
}

TEST(MmpdeCoefficients, UniformDilation) {
  const auto t = unit_disk(16);
  std::vector<Vec2> x(t.nodes.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 2.0 * t.nodes[i];
  const auto c = compute_coefficients(t, x);
  for (std::size_t e = 0; e < t.triangles.size(); ++e) {
    EXPECT_NEAR(c.J[e], 4.0, 1e-13);
    EXPECT_NEAR(c.a[e], 0.25, 1e-14);
    EXPECT_NEAR(c.c[e], 0.25, 1e-14);
    EXPECT_NEAR(c.b[e], 0.0, 1e-14);
  }
}

TEST(MmpdeCoefficients, AffineMapGivesConstantCoefficients) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  const auto t = unit_disk(24);
  for (int trial = 0; trial < 5; ++trial) {
    const double A = 1.0 + u(rng), B = u(rng), C = u(rng), D = 1.0 + u(rng);
    std::vector<Vec2> x(t.nodes.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = Vec2{A * t.nodes[i].x + B * t.nodes[i].y + 0.3, C * t.nodes[i].x + D * t.nodes[i].y - 0.1};
    const auto c = compute_coefficients(t, x);
    const double J = A * D - B * C;
    const double a = (B * B + D * D) / (J * J), b = -2.0 * (A * B + C * D) / (J * J), cc = (A * A + C * C) / (J * J);
    for (std::size_t e = 0; e < t.triangles.size(); ++e) {
      EXPECT_NEAR(c.a[e], a, 1e-13);
      EXPECT_NEAR(c.b[e], b, 1e-13);
      EXPECT_NEAR(c.c[e], cc, 1e-13);
      EXPECT_NEAR(c.J[e], J, 1e-13);
    }
  }
}

TEST(MmpdeCoefficients, TangledMapThrows) {
  const auto t = unit_disk(16);
  auto x = t.nodes;
  for (auto &p : x) p.x = -p.x;
  EXPECT_THROW(compute_coefficients(t, x), NumericalError);
}

TEST(Recovery, ConstantFieldIsReproduced) {
  const auto t = unit_disk(20);
  const auto v = recover_field(t, std::vector<double>(t.triangles.size(), 2.75));
  for (double x : v) EXPECT_NEAR(x, 2.75, 1e-14);
}

TEST(Recovery, CheckerboardIsStrictlyAveraged) {
  const int n = 6;
  const auto t = grid(n);
  std::vector<double> e(t.triangles.size());
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) e[2 * (j * n + i)] = e[2 * (j * n + i) + 1] = ((i + j) % 2) ? -1.0 : 1.0;
  const auto v = recover_field(t, e);
  for (int j = 1; j < n; ++j)
    for (int i = 1; i < n; ++i) EXPECT_LT(std::abs(v[j * (n + 1) + i]), 1.0);
}

TEST(Recovery, SmoothCoefficientConvergesFirstOrder) {
  // x = xi + 0.1 xi^2, y = eta has a = 1 / (1 + 0.2 xi)^2.
  auto err = [](int n) {
    const auto t = grid(n);
    std::vector<Vec2> x(t.nodes.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = {t.nodes[i].x + 0.1 * t.nodes[i].x * t.nodes[i].x, t.nodes[i].y};
    const auto rc = recover_coefficients(compute_coefficients(t, x), t);
    double m = 0.0;
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) {
        const int k = j * (n + 1) + i;
        m = std::max(m, std::abs(rc.a[k] - 1.0 / std::pow(1.0 + 0.2 * t.nodes[k].x, 2)));
      }
    return m;
  };
  const double e1 = err(8), e2 = err(16);
  EXPECT_LT(e1, 0.05);
  EXPECT_GT(e1 / e2, 1.8);
}

TEST(Recovery, IsolatedNodeThrows) {
  auto t = grid(2);
  t.nodes.push_back({5.0, 5.0});
  EXPECT_THROW(recover_field(t, std::vector<double>(t.triangles.size(), 1.0)), NumericalError);
}

TEST(MmpdeStep, IdentityIsAFixedPoint) {
  const auto m = make_bulk_mesh(unit_disk(30));
  MmpdeParams p;
  p.tau_hat = 0.1;
  p.dt = 0.05;
  const auto x = mmpde_step(m, m.topo.nodes, m.topo.inner_loop, loop_values(m.topo, m.topo.nodes), p);
  EXPECT_LT(max_dist(x, m.topo.nodes), 1e-12);
  EXPECT_NEAR(min_jacobian(m.topo, x), 1.0, 1e-12);
}

TEST(MmpdeStep, RelaxesPerturbationBackToIdentity) {
  const auto m = make_bulk_mesh(unit_disk(30));
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<char> bnd(m.node_count(), 0);
  for (int i : m.topo.inner_loop) bnd[i] = 1;
  auto x = m.topo.nodes;
  for (int i = 0; i < m.node_count(); ++i)
    if (!bnd[i]) x[i] += 0.01 * Vec2{u(rng), u(rng)};
  MmpdeParams p;
  p.tau_hat = 1.0;
  p.dt = 10.0;
  const auto dv = loop_values(m.topo, m.topo.nodes);
  for (int k = 0; k < 40; ++k) x = mmpde_step(m, x, m.topo.inner_loop, dv, p);
  EXPECT_LT(max_dist(x, m.topo.nodes), 1e-6);
}

TEST(MmpdeStep, TranslationEquivariance) {
  const auto m = make_bulk_mesh(unit_disk(30));
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<char> bnd(m.node_count(), 0);
  for (int i : m.topo.inner_loop) bnd[i] = 1;
  auto x = m.topo.nodes;
  for (int i = 0; i < m.node_count(); ++i)
    if (!bnd[i]) x[i] += 0.01 * Vec2{u(rng), u(rng)};
  MmpdeParams p;
  p.tau_hat = 0.1;
  p.dt = 0.05;
  const Vec2 T{0.37, -0.2};
  auto dv = loop_values(m.topo, x);
  const auto a = mmpde_step(m, x, m.topo.inner_loop, dv, p);
  auto xs = x;
  for (auto &q : xs) q += T;
  for (auto &q : dv) q += T;
  const auto b = mmpde_step(m, xs, m.topo.inner_loop, dv, p);
  for (int i = 0; i < m.node_count(); ++i) EXPECT_LT(norm(b[i] - (a[i] + T)), 1e-12);
}

TEST(MmpdeStep, RigidBoundaryShiftMovesInteriorRigidly) {
  const auto m = make_bulk_mesh(unit_disk(24));
  const Vec2 T{0.05, 0.0};
  auto dv = loop_values(m.topo, m.topo.nodes);
  for (auto &q : dv) q += T;
  MmpdeParams p;
  p.tau_hat = 1.0;
  p.dt = 10.0;
  auto x = m.topo.nodes;
  for (int k = 0; k < 40; ++k) x = mmpde_step(m, x, m.topo.inner_loop, dv, p);
  for (int i = 0; i < m.node_count(); ++i) EXPECT_LT(norm(x[i] - (m.topo.nodes[i] + T)), 1e-8);
}

TEST(MmpdeStep, InvalidParametersThrow) {
  const auto m = make_bulk_mesh(unit_disk(16));
  MmpdeParams p;
  p.tau_hat = 0.0;
  p.dt = 0.1;
  EXPECT_THROW(mmpde_step(m, m.topo.nodes, m.topo.inner_loop, loop_values(m.topo, m.topo.nodes), p), ConfigError);
}

TEST(ExteriorFrame, ZeroAndUnitShift) {
  Triangulation ext;
  ext.nodes = {{0, 0}, {3, 0}, {0, 3}, {-3, 0}};
  ext.outer_loop = {1, 2, 3};
  const auto same = translate_exterior_frame(ext, ext.nodes, {0, 0});
  ASSERT_EQ(same.size(), 3u);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(same[k], ext.nodes[ext.outer_loop[k]]);
  const auto moved = translate_exterior_frame(ext, ext.nodes, {1, 0});
  for (int k = 0; k < 3; ++k) EXPECT_EQ(moved[k], (ext.nodes[ext.outer_loop[k]] + Vec2{1, 0}));
}
