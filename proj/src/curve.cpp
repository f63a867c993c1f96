#include "morphosim/curve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "morphosim/sparse.hpp"

namespace morphosim {

void geometry_update(CurveState &c) {
  const int n = c.size();
  if (n < 4) throw NumericalError("curve", "at least 4 nodes required");
  c.normal.assign(n, {});
  c.tangent.assign(n, {});
  c.kappa.assign(n, 0.0);
  c.speed.assign(n, 0.0);
  const double N = static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    const Vec2 &xm = c.x[(i + n - 1) % n];
    const Vec2 &xp = c.x[(i + 1) % n];
    const Vec2 d1 = 0.5 * N * (xp - xm);
    const Vec2 d2 = N * N * (xp - 2.0 * c.x[i] + xm);
    const double s = norm(d1);
    if (!(s >= 1e-14)) throw NumericalError("curve", "coincident nodes near node " + std::to_string(i));
    c.speed[i] = s;
    c.tangent[i] = (1.0 / s) * d1;
    c.normal[i] = rot_cw(c.tangent[i]);
    c.kappa[i] = -dot(d2, c.normal[i]) / (s * s);
  }
}

CurveState make_curve(std::vector<Vec2> points) {
  CurveState c;
  c.x = std::move(points);
  geometry_update(c);
  return c;
}

CurveState extract_curve(const Triangulation &tri) {
  if (tri.inner_loop.size() < 3) throw NumericalError("curve", "boundary loop is empty");
  // The loop must be closed: consecutive nodes (including last->first) share a triangle edge.
  const auto &loop = tri.inner_loop;
  std::vector<std::vector<int>> adj(tri.nodes.size());
  for (const auto &t : tri.triangles)
    for (int k = 0; k < 3; ++k) adj[t[k]].push_back(t[(k + 1) % 3]);
  for (std::size_t i = 0; i < loop.size(); ++i) {
    int a = loop[i], b = loop[(i + 1) % loop.size()];
    const auto &na = adj[a];
    const auto &nb = adj[b];
    if (std::find(na.begin(), na.end(), b) == na.end() && std::find(nb.begin(), nb.end(), a) == nb.end())
      throw NumericalError("curve", "boundary loop is not closed");
  }
  auto pts = loop_points(tri, loop);
  // Node i of the curve stays tied to inner_loop[i], so the loop is not reordered.
  if (!(polygon_area(pts) > 0)) throw NumericalError("curve", "boundary loop is not counter-clockwise");
  return make_curve(std::move(pts));
}

double curve_area(const CurveState &c) { return polygon_area(c.x); }
double curve_perimeter(const CurveState &c) { return polygon_perimeter(c.x); }

double equidistribution_ratio(const CurveState &c) {
  double lo = 1e300, hi = 0.0;
  for (int i = 0; i < c.size(); ++i) {
    double s = norm(c.x[(i + 1) % c.size()] - c.x[i]);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return hi / lo;
}

CurveState evolve_curve(const CurveState &c, const NormalVelocityLaw &law,
                        const CurveMotionParams &p, double t) {
  if (!(p.dt > 0.0) || !(p.tau > 0.0)) throw ConfigError("evolve_curve: dt and tau must be positive");
  const int n = c.size();
  const double N = static_cast<double>(n);
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(n) * 12);
  std::vector<double> rhs(2 * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Vec2 &nn = c.normal[i];
    const Vec2 &tt = c.tangent[i];
    const double alpha = law.alpha ? law.alpha(i, c.x[i], t) : 0.0;
    const double beta = law.beta ? law.beta(i, c.x[i], t) : 0.0;
    const double v = p.tangential ? p.tangential(i, c.x[i], t) : 0.0;
    // dt * N^2 * (-alpha n n^T + t t^T / tau) / |x_sigma|^2
    const double f = p.dt * N * N / (c.speed[i] * c.speed[i]);
    const double a[2][2] = {{f * (-alpha * nn.x * nn.x + tt.x * tt.x / p.tau),
                             f * (-alpha * nn.x * nn.y + tt.x * tt.y / p.tau)},
                            {f * (-alpha * nn.y * nn.x + tt.y * tt.x / p.tau),
                             f * (-alpha * nn.y * nn.y + tt.y * tt.y / p.tau)}};
    const int im = (i + n - 1) % n, ip = (i + 1) % n;
    for (int r = 0; r < 2; ++r) {
      const int row = 2 * i + r;
      trip.push_back({row, row, 1.0});
      for (int s = 0; s < 2; ++s) {
        trip.push_back({row, 2 * i + s, 2.0 * a[r][s]});
        trip.push_back({row, 2 * im + s, -a[r][s]});
        trip.push_back({row, 2 * ip + s, -a[r][s]});
      }
    }
    const Vec2 b = c.x[i] + p.dt * (beta * nn + v * tt);
    rhs[2 * i] = b.x;
    rhs[2 * i + 1] = b.y;
  }
  auto A = SparseMatrix::from_triplets(2 * n, 2 * n, std::move(trip));
  std::vector<double> sol;
  try {
    sol = solve_sparse(A, rhs);
  } catch (const NumericalError &e) {
    throw NumericalError("curve", e.what());
  }
  std::vector<Vec2> x(n);
  for (int i = 0; i < n; ++i) x[i] = {sol[2 * i], sol[2 * i + 1]};
  if (!(polygon_area(x) > 0.0)) throw NumericalError("curve", "enclosed area collapsed");
  return make_curve(std::move(x));
}

double cortical_tension_rate(const CortexState &c, double A, double dA_dt) {
  if (!(c.lambda + c.lambda0 > 0.0)) throw NumericalError("cortex", "lambda + lambda0 must be positive");
  return c.lambda0 * c.lambda / (c.A0 * (c.lambda + c.lambda0)) * (c.upsilon * (A - c.A0) + dA_dt) -
         c.beta_relax * c.lambda;
}

CortexState cortical_tension_step(const CortexState &c, double A, double dA_dt, double dt) {
  CortexState next = c;
  next.lambda = std::max(0.0, c.lambda + dt * cortical_tension_rate(c, A, dA_dt));
  return next;
}

NormalVelocityLaw membrane_velocity_law(std::vector<double> c_s, const CortexState &cortex,
                                        double k_prot) {
  const double lambda = cortex.lambda;
  NormalVelocityLaw law;
  law.alpha = [lambda](int, const Vec2 &, double) { return -lambda; };
  law.beta = [cs = std::move(c_s), k_prot](int i, const Vec2 &, double) { return k_prot * cs.at(i); };
  return law;
}

}  // namespace morphosim
