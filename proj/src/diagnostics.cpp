#include "morphosim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "morphosim/stepper.hpp"

namespace morphosim {

double total_mass(const SparseMatrix &M, const std::vector<double> &C) {
  if (M.cols() != static_cast<int>(C.size())) throw std::invalid_argument("total_mass: dimension mismatch");
  const auto cs = M.column_sums();
  double s = 0.0;
  for (std::size_t i = 0; i < C.size(); ++i) s += cs[i] * C[i];
  return s;
}

double MassLedger::bulk_interior_total() const {
  double s = 0.0;
  for (double v : bulk_interior) s += v;
  return s;
}

double MassLedger::surface_interior_total() const {
  double s = 0.0;
  for (double v : surface_interior) s += v;
  return s;
}

void finalize_ledger(MassLedger &L) {
  L.grand_total = L.bulk_interior_total() + L.surface_interior_total();
  double e = 0.0;
  for (double v : L.bulk_exterior) e += v;
  for (double v : L.surface_exterior) e += v;
  L.exterior_total = e;
}

ConservationError conservation_error(const MassLedger &prev, const MassLedger &next, double ref) {
  ConservationError e;
  e.abs = std::abs(next.grand_total - prev.grand_total);
  e.rel = ref != 0.0 ? e.abs / std::abs(ref) : e.abs;
  return e;
}

ErrorReport error_norms(const BulkMesh &m, const std::vector<Vec2> &x, const std::vector<double> &c,
                        const std::function<double(const Vec2 &)> &exact) {
  const auto &rule = triangle_rule(5);
  ErrorReport r;
  double sum = 0.0;
  for (const auto &t : m.topo.triangles) {
    const Vec2 &p0 = x[t[0]], &p1 = x[t[1]], &p2 = x[t[2]];
    const double area = 0.5 * cross(p1 - p0, p2 - p0);
    for (std::size_t q = 0; q < rule.weight.size(); ++q) {
      const auto &b = rule.bary[q];
      const Vec2 xq = b[0] * p0 + b[1] * p1 + b[2] * p2;
      const double e = b[0] * c[t[0]] + b[1] * c[t[1]] + b[2] * c[t[2]] - exact(xq);
      sum += rule.weight[q] * area * e * e;
      r.Linf = std::max(r.Linf, std::abs(e));
    }
    r.h = std::max({r.h, norm(p1 - p0), norm(p2 - p1), norm(p0 - p2)});
  }
  r.L2 = std::sqrt(sum);
  r.dofs = static_cast<int>(c.size());
  return r;
}

void compute_orders(ConvergenceTable &table) {
  auto &rows = table.rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto order = [](double e0, double e1, double h0, double h1) {
    // Errors at the rounding floor carry no rate information.
    if (!(e1 < e0) || e1 < 1e-13 || !(h1 < h0)) return std::numeric_limits<double>::quiet_NaN();
    return std::log(e0 / e1) / std::log(h0 / h1);
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0) {
      rows[i].order_L2 = rows[i].order_Linf = nan;
      continue;
    }
    rows[i].order_L2 = order(rows[i - 1].L2, rows[i].L2, rows[i - 1].h, rows[i].h);
    rows[i].order_Linf = order(rows[i - 1].Linf, rows[i].Linf, rows[i - 1].h, rows[i].h);
  }
}

MeshTelemetry mesh_telemetry(const Triangulation &topo, const std::vector<Vec2> &x,
                             const CurveState &curve) {
  MeshTelemetry t;
  t.min_area = 1e300;
  t.min_angle = 180.0;
  for (const auto &tri : topo.triangles) {
    const Vec2 &a = x[tri[0]], &b = x[tri[1]], &c = x[tri[2]];
    t.min_area = std::min(t.min_area, 0.5 * cross(b - a, c - a));
    const Vec2 *p[3] = {&a, &b, &c};
    for (int k = 0; k < 3; ++k) {
      const Vec2 u = *p[(k + 1) % 3] - *p[k], v = *p[(k + 2) % 3] - *p[k];
      const double ang = std::atan2(std::abs(cross(u, v)), dot(u, v)) * 180.0 / kPi;
      t.min_angle = std::min(t.min_angle, ang);
    }
  }
  t.equidistribution = equidistribution_ratio(curve);
  t.centroid = polygon_centroid(curve.x);
  return t;
}

const char *const kStepCsvHeader =
    "time,total_bulk_interior,total_surface_interior,grand_total,cons_err_abs,cons_err_rel,min_area,"
    "min_angle,lambda,centroid_x,centroid_y";
const char *const kConvergenceCsvHeader = "h,dof,L2,Linf,order_L2,order_Linf";

void write_step_row(std::ostream &os, const MassLedger &L, const MeshTelemetry &t, double lambda) {
  os << std::setprecision(17) << L.time << ',' << L.bulk_interior_total() << ','
     << L.surface_interior_total() << ',' << L.grand_total << ',' << L.err_abs << ',' << L.err_rel << ','
     << t.min_area << ',' << t.min_angle << ',' << lambda << ',' << t.centroid.x << ',' << t.centroid.y
     << '\n';
}

void write_convergence_csv(std::ostream &os, const ConvergenceTable &table) {
  os << kConvergenceCsvHeader << '\n' << std::setprecision(17);
  for (const auto &r : table.rows)
    os << r.h << ',' << r.dofs << ',' << r.L2 << ',' << r.Linf << ',' << r.order_L2 << ',' << r.order_Linf
       << '\n';
}

ConvergenceTable convergence_study(const std::function<Problem()> &make, int levels, RefinementMode mode,
                                   const SchemeConfig &scheme) {
  if (levels < 1) throw ConfigError("convergence study needs at least one level");
  ConvergenceTable table;
  for (int k = 0; k < levels; ++k) {
    Problem p = make();
    if (!p.system.exact) throw ConfigError("problem '" + p.system.name + "' has no exact solution");
    if (mode == RefinementMode::split) {
      p.mesh.refine_levels += k;
    } else if (p.mesh.kind == MeshKind::star) {
      p.mesh.star_h /= std::ldexp(1.0, k);
    } else {
      p.mesh.n_boundary *= 1 << k;
    }
    auto exact = p.system.exact;
    Simulation sim(std::move(p), scheme);
    const int n = scheme.steps();
    for (int s = 0; s < n; ++s) sim.advance();
    const double T = sim.state().time;
    const auto r = error_norms(sim.interior_mesh(), sim.state().x_int, sim.state().c[0],
                               [&](const Vec2 &x) { return exact(x, T); });
    table.rows.push_back({r.h, r.dofs, r.L2, r.Linf});
  }
  compute_orders(table);
  return table;
}

}  // namespace morphosim
