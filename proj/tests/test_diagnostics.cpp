#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "morphosim/diagnostics.hpp"
#include "morphosim/mesh.hpp"

using namespace morphosim;

namespace {

BulkMesh unit_triangle() {
  Triangulation t;
  t.nodes = {{0, 0}, {1, 0}, {0, 1}};
  t.triangles = {{0, 1, 2}};
  return make_bulk_mesh(t);
}

double polygon_area_of(const Triangulation &t) {
  double a = 0.0;
  for (const auto &tri : t.triangles)
    a += 0.5 * cross(t.nodes[tri[1]] - t.nodes[tri[0]], t.nodes[tri[2]] - t.nodes[tri[0]]);
  return a;
}

}  // namespace

TEST(Orders, SyntheticSecondOrderData) {
  ConvergenceTable t;
  for (int k = 0; k < 4; ++k) {
    const double h = 0.1 / (1 << k);
    t.rows.push_back({h, 10 << (2 * k), 3.0 * h * h, 5.0 * std::pow(h, 1.5)});
  }
  compute_orders(t);
  EXPECT_TRUE(std::isnan(t.rows[0].order_L2));
  EXPECT_TRUE(std::isnan(t.rows[0].order_Linf));
  for (int k = 1; k < 4; ++k) {
    EXPECT_NEAR(t.rows[k].order_L2, 2.0, 1e-12);
    EXPECT_NEAR(t.rows[k].order_Linf, 1.5, 1e-12);
  }
}

TEST(Orders, StagnationKeepsSentinel) {
  ConvergenceTable t;
  t.rows = {{0.1, 10, 1e-3, 1e-3}, {0.05, 40, 2e-3, 5e-4}, {0.025, 160, 1e-15, 1e-4}};
  compute_orders(t);
  EXPECT_TRUE(std::isnan(t.rows[1].order_L2));
  EXPECT_NEAR(t.rows[1].order_Linf, 1.0, 1e-12);
  EXPECT_TRUE(std::isnan(t.rows[2].order_L2));
}

TEST(TotalMass, PartitionOfUnityGivesArea) {
  const auto tri = generate_circle_mesh(1.0, 24, 2.0 * kPi / 24);
  const auto m = make_bulk_mesh(tri);
  const auto M = assemble_mass(m, tri.nodes);
  EXPECT_NEAR(total_mass(M, std::vector<double>(tri.nodes.size(), 1.0)), polygon_area_of(tri), 1e-14);
  EXPECT_EQ(total_mass(M, std::vector<double>(tri.nodes.size(), 0.0)), 0.0);
  EXPECT_THROW(total_mass(M, {1.0}), std::invalid_argument);
}

TEST(TotalMass, LinearFieldOnUnitTriangle) {
  const auto m = unit_triangle();
  const auto M = assemble_mass(m, m.topo.nodes);
  EXPECT_NEAR(total_mass(M, {0.0, 1.0, 0.0}), 1.0 / 6.0, 1e-16);
}

TEST(ErrorNorms, ExactLinearFieldHasZeroError) {
  const auto tri = generate_circle_mesh(1.0, 20, 2.0 * kPi / 20);
  const auto m = make_bulk_mesh(tri);
  auto f = [](const Vec2 &x) { return 2.0 * x.x - 0.5 * x.y + 1.0; };
  std::vector<double> c;
  for (const auto &x : tri.nodes) c.push_back(f(x));
  const auto r = error_norms(m, tri.nodes, c, f);
  EXPECT_LT(r.L2, 1e-14);
  EXPECT_LT(r.Linf, 1e-14);
  EXPECT_EQ(r.dofs, static_cast<int>(tri.nodes.size()));
  EXPECT_GT(r.h, 0.0);
}

TEST(ErrorNorms, ConstantOffset) {
  const auto tri = generate_circle_mesh(1.0, 20, 2.0 * kPi / 20);
  const auto m = make_bulk_mesh(tri);
  const double eta = 0.37;
  const auto r = error_norms(m, tri.nodes, std::vector<double>(tri.nodes.size(), eta),
                             [](const Vec2 &) { return 0.0; });
  EXPECT_NEAR(r.L2, eta * std::sqrt(polygon_area_of(tri)), 1e-14);
  EXPECT_NEAR(r.Linf, eta, 1e-15);
}

TEST(Ledger, TotalsAndConservationError) {
  MassLedger a;
  a.bulk_interior = {1.0, 2.0};
  a.surface_interior = {0.5};
  a.bulk_exterior = {7.0};
  finalize_ledger(a);
  EXPECT_DOUBLE_EQ(a.grand_total, 3.5);
  EXPECT_DOUBLE_EQ(a.exterior_total, 7.0);
  MassLedger b = a;
  b.surface_interior = {0.5 + 3.5e-6};
  finalize_ledger(b);
  const auto e = conservation_error(a, b, a.grand_total);
  EXPECT_NEAR(e.abs, 3.5e-6, 1e-15);
  EXPECT_NEAR(e.rel, 1e-6, 1e-15);
  EXPECT_EQ(conservation_error(a, b, 0.0).rel, e.abs);
}

TEST(Telemetry, RightTriangle) {
  const auto m = unit_triangle();
  const auto c = make_curve({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const auto t = mesh_telemetry(m.topo, m.topo.nodes, c);
  EXPECT_DOUBLE_EQ(t.min_area, 0.5);
  EXPECT_NEAR(t.min_angle, 45.0, 1e-12);
  EXPECT_NEAR(t.centroid.x, 0.5, 1e-15);
  EXPECT_NEAR(t.centroid.y, 0.5, 1e-15);
}

TEST(Csv, HeadersAndRows) {
  EXPECT_EQ(std::string(kConvergenceCsvHeader), "h,dof,L2,Linf,order_L2,order_Linf");
  std::ostringstream os;
  ConvergenceTable t;
  t.rows = {{0.1, 10, 1e-2, 2e-2}, {0.05, 40, 2.5e-3, 5e-3}};
  compute_orders(t);
  write_convergence_csv(os, t);
  std::istringstream is(os.str());
  std::string line;
  int n = 0;
  while (std::getline(is, line)) ++n;
  EXPECT_EQ(n, 3);
  EXPECT_NE(os.str().find("nan"), std::string::npos);

  std::ostringstream row;
  MassLedger L;
  L.time = 1.5;
  finalize_ledger(L);
  write_step_row(row, L, {}, 0.25);
  const std::string header = kStepCsvHeader;
  const auto commas = [](const std::string &s) { return std::count(s.begin(), s.end(), ','); };
  EXPECT_EQ(commas(row.str()), commas(header));
  EXPECT_EQ(header.rfind("time,", 0), 0u);
}
