#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "morphosim/curve.hpp"
#include "morphosim/fem.hpp"

namespace morphosim {

// e^T M C computed from the column sums of M.
double total_mass(const SparseMatrix &M, const std::vector<double> &C);

struct MassLedger {
  double time = 0.0;
  std::vector<double> bulk_interior;     // per species e^T M C
  std::vector<double> surface_interior;  // per species e_s^T M_s C_s
  std::vector<double> bulk_exterior;
  std::vector<double> surface_exterior;
  double grand_total = 0.0;  // interior bulk plus interior surface
  double exterior_total = 0.0;
  double err_abs = 0.0;  // against the previous ledger
  double err_rel = 0.0;  // normalised by the initial grand total

  double bulk_interior_total() const;
  double surface_interior_total() const;
};

// Sums the parts in a fixed order so the totals are reproducible.
void finalize_ledger(MassLedger &ledger);

struct ConservationError {
  double abs = 0.0;
  double rel = 0.0;
};

ConservationError conservation_error(const MassLedger &prev, const MassLedger &next,
                                     double reference_total);

struct ErrorReport {
  double L2 = 0.0;
  double Linf = 0.0;
  double h = 0.0;
  int dofs = 0;
};

// 7-point rule per element; L-infinity is the maximum over the quadrature points.
ErrorReport error_norms(const BulkMesh &m, const std::vector<Vec2> &x, const std::vector<double> &c,
                        const std::function<double(const Vec2 &)> &exact);

struct ConvergenceRow {
  double h = 0.0;
  int dofs = 0;
  double L2 = 0.0;
  double Linf = 0.0;
  double order_L2 = std::numeric_limits<double>::quiet_NaN();
  double order_Linf = std::numeric_limits<double>::quiet_NaN();
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
};

// order_i = log(e_{i-1}/e_i)/log(h_{i-1}/h_i). Rows whose error did not
// decrease, or sits at the rounding floor, keep the NaN sentinel.
void compute_orders(ConvergenceTable &table);

struct MeshTelemetry {
  double min_area = 0.0;
  double min_angle = 0.0;  // degrees
  double equidistribution = 1.0;
  Vec2 centroid;
};

MeshTelemetry mesh_telemetry(const Triangulation &topo, const std::vector<Vec2> &x,
                             const CurveState &curve);

extern const char *const kStepCsvHeader;
extern const char *const kConvergenceCsvHeader;

void write_step_row(std::ostream &os, const MassLedger &ledger, const MeshTelemetry &tel,
                    double lambda);
void write_convergence_csv(std::ostream &os, const ConvergenceTable &table);

}  // namespace morphosim
