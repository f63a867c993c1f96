#include "morphosim/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace morphosim {

namespace {

struct ElementGeometry {
  double area;
  Vec2 grad[3];
};

ElementGeometry element_geometry(const Vec2 &p0, const Vec2 &p1, const Vec2 &p2) {
  const double a2 = cross(p1 - p0, p2 - p0);
  if (!(a2 > 0.0)) throw NumericalError("assembly", "degenerate or inverted element");
  ElementGeometry g;
  g.area = 0.5 * a2;
  const Vec2 *p[3] = {&p0, &p1, &p2};
  for (int i = 0; i < 3; ++i) {
    const Vec2 &pj = *p[(i + 1) % 3];
    const Vec2 &pk = *p[(i + 2) % 3];
    g.grad[i] = {(pj.y - pk.y) / a2, (pk.x - pj.x) / a2};
  }
  return g;
}

std::shared_ptr<const SparsityPattern> pattern_of(int n, std::vector<Triplet> t) {
  return SparseMatrix::from_triplets(n, n, std::move(t)).pattern_ptr();
}

int slot(const SparsityPattern &p, int r, int c) {
  int s = p.find(r, c);
  if (s < 0) throw std::logic_error("sparsity slot missing");
  return s;
}

constexpr double kGauss2[2] = {0.21132486540518711775, 0.78867513459481288225};

}  // namespace

BulkMesh make_bulk_mesh(Triangulation topo) {
  BulkMesh m;
  const int n = static_cast<int>(topo.nodes.size());
  std::vector<Triplet> t;
  t.reserve(topo.triangles.size() * 9);
  for (const auto &tri : topo.triangles)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) t.push_back({tri[a], tri[b], 0.0});
  m.pattern = pattern_of(n, std::move(t));
  m.slots.reserve(topo.triangles.size());
  for (const auto &tri : topo.triangles) {
    std::array<int, 9> s{};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) s[a * 3 + b] = slot(*m.pattern, tri[a], tri[b]);
    m.slots.push_back(s);
  }
  const auto &loop = topo.inner_loop;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    int u = loop[i], v = loop[(i + 1) % loop.size()];
    m.loop_slots.push_back({slot(*m.pattern, u, u), slot(*m.pattern, u, v), slot(*m.pattern, v, u),
                            slot(*m.pattern, v, v)});
  }
  m.topo = std::move(topo);
  return m;
}

CurveMesh make_curve_mesh(int n) {
  if (n < 3) throw std::invalid_argument("make_curve_mesh: n < 3");
  CurveMesh cm;
  cm.n = n;
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    int j = (i + 1) % n;
    t.push_back({i, i, 0.0});
    t.push_back({i, j, 0.0});
    t.push_back({j, i, 0.0});
  }
  cm.pattern = pattern_of(n, std::move(t));
  for (int i = 0; i < n; ++i) {
    int j = (i + 1) % n;
    cm.seg_slots.push_back({slot(*cm.pattern, i, i), slot(*cm.pattern, i, j), slot(*cm.pattern, j, i),
                            slot(*cm.pattern, j, j)});
  }
  return cm;
}

QuadratureSpec gaussian_source_quadrature(std::function<Vec2()> center, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian_source_quadrature: width must be positive");
  QuadratureSpec q;
  q.degree = 5;
  q.subdivisions = [center = std::move(center), width](const Vec2 &a, const Vec2 &b, const Vec2 &c) {
    const double diam = std::max({norm(b - a), norm(c - b), norm(a - c)});
    const Vec2 g = (1.0 / 3.0) * (a + b + c);
    if (norm(g - center()) > 6.0 * width + diam) return 0;
    return std::clamp(static_cast<int>(std::ceil(std::log2(diam / (0.25 * width)))), 0, 6);
  };
  return q;
}

AleFrame make_ale_frame(std::vector<Vec2> prev, std::vector<Vec2> next, double dt) {
  if (prev.size() != next.size()) throw std::invalid_argument("make_ale_frame: size mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("make_ale_frame: dt must be positive");
  AleFrame f;
  f.w.resize(prev.size());
  for (std::size_t i = 0; i < prev.size(); ++i) f.w[i] = (1.0 / dt) * (next[i] - prev[i]);
  f.positions_prev = std::move(prev);
  f.positions_next = std::move(next);
  f.dt = dt;
  return f;
}

SparseMatrix assemble_mass(const BulkMesh &m, const std::vector<Vec2> &x) {
  SparseMatrix M(m.pattern);
  auto &v = M.values();
  for (std::size_t e = 0; e < m.topo.triangles.size(); ++e) {
    const auto &t = m.topo.triangles[e];
    const auto g = element_geometry(x[t[0]], x[t[1]], x[t[2]]);
    const double d = g.area / 6.0, o = g.area / 12.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) v[m.slots[e][a * 3 + b]] += a == b ? d : o;
  }
  return M;
}

SparseMatrix assemble_stiffness(const BulkMesh &m, const std::vector<Vec2> &x, double D) {
  if (D < 0.0) throw std::invalid_argument("assemble_stiffness: negative diffusivity");
  SparseMatrix K(m.pattern);
  auto &v = K.values();
  for (std::size_t e = 0; e < m.topo.triangles.size(); ++e) {
    const auto &t = m.topo.triangles[e];
    const auto g = element_geometry(x[t[0]], x[t[1]], x[t[2]]);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) v[m.slots[e][a * 3 + b]] += D * g.area * dot(g.grad[a], g.grad[b]);
  }
  return K;
}

SparseMatrix assemble_advection_bulk(const BulkMesh &m, const std::vector<Vec2> &x,
                                     const std::vector<Vec2> &rel) {
  SparseMatrix B(m.pattern);
  auto &v = B.values();
  for (std::size_t e = 0; e < m.topo.triangles.size(); ++e) {
    const auto &t = m.topo.triangles[e];
    const auto g = element_geometry(x[t[0]], x[t[1]], x[t[2]]);
    // int phi_mu phi_k = |K|(1 + delta)/12, so int phi_mu (w-u) = |K|/12 (sum + own).
    Vec2 sum = rel[t[0]] + rel[t[1]] + rel[t[2]];
    for (int mu = 0; mu < 3; ++mu) {
      const Vec2 avg = (g.area / 12.0) * (sum + rel[t[mu]]);
      for (int nu = 0; nu < 3; ++nu) v[m.slots[e][nu * 3 + mu]] += dot(avg, g.grad[nu]);
    }
  }
  return B;
}

SparseMatrix assemble_boundary_advection(const BulkMesh &m, const std::vector<Vec2> &x,
                                         const std::vector<double> &g) {
  const auto &loop = m.topo.inner_loop;
  if (g.size() != loop.size()) throw std::invalid_argument("assemble_boundary_advection: size mismatch");
  SparseMatrix A(m.pattern);
  auto &v = A.values();
  const std::size_t n = loop.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const double h = norm(x[loop[j]] - x[loop[i]]);
    const double g0 = g[i], g1 = g[j];
    const auto &s = m.loop_slots[i];
    v[s[0]] += h * (g0 / 4.0 + g1 / 12.0);
    v[s[1]] += h * (g0 + g1) / 12.0;
    v[s[2]] += h * (g0 + g1) / 12.0;
    v[s[3]] += h * (g0 / 12.0 + g1 / 4.0);
  }
  return A;
}

SparseMatrix assemble_boundary_advection(const BulkMesh &m, const CurveState &curve,
                                         const std::vector<Vec2> &w, const std::vector<Vec2> &u,
                                         double orientation) {
  const int n = curve.size();
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = orientation * dot(w[i] - u[i], curve.normal[i]);
  std::vector<Vec2> x(m.topo.nodes.size());
  for (int i = 0; i < n; ++i) x[m.topo.inner_loop[i]] = curve.x[i];
  return assemble_boundary_advection(m, x, g);
}

SurfaceOperators assemble_surface_operators(const CurveMesh &cm, const std::vector<Vec2> &x,
                                            const std::vector<double> &g) {
  SurfaceOperators op{SparseMatrix(cm.pattern), SparseMatrix(cm.pattern), SparseMatrix(cm.pattern)};
  auto &M = op.M.values();
  auto &K = op.K.values();
  auto &B = op.B.values();
  const int n = cm.n;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const double h = norm(x[j] - x[i]);
    if (!(h > 0.0)) throw NumericalError("assembly", "zero-length curve segment at node " + std::to_string(i));
    const auto &s = cm.seg_slots[i];
    M[s[0]] += h / 3.0;
    M[s[1]] += h / 6.0;
    M[s[2]] += h / 6.0;
    M[s[3]] += h / 3.0;
    K[s[0]] += 1.0 / h;
    K[s[1]] -= 1.0 / h;
    K[s[2]] -= 1.0 / h;
    K[s[3]] += 1.0 / h;
    const double dphi[2] = {-1.0 / h, 1.0 / h};
    const double dg = (g[j] - g[i]) / h;
    for (double xi : kGauss2) {
      const double phi[2] = {1.0 - xi, xi};
      const double gq = phi[0] * g[i] + phi[1] * g[j];
      for (int mu = 0; mu < 2; ++mu) {
        const double dflux = dphi[mu] * gq + phi[mu] * dg;
        for (int nu = 0; nu < 2; ++nu) B[s[nu * 2 + mu]] += 0.5 * h * dflux * phi[nu];
      }
    }
  }
  return op;
}

SurfaceOperators assemble_surface_operators(const CurveMesh &cm, const CurveState &curve,
                                            const std::vector<Vec2> &w, const std::vector<Vec2> &u) {
  std::vector<double> g(curve.size());
  for (int i = 0; i < curve.size(); ++i) g[i] = dot(w[i] - u[i], curve.tangent[i]);
  return assemble_surface_operators(cm, curve.x, g);
}

const TriangleRule &triangle_rule(int degree) {
  static const TriangleRule r2 = [] {
    TriangleRule r;
    const double a = 2.0 / 3.0, b = 1.0 / 6.0;
    r.bary = {{a, b, b}, {b, a, b}, {b, b, a}};
    r.weight = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return r;
  }();
  static const TriangleRule r5 = [] {
    TriangleRule r;
    const double a1 = 0.059715871789769820, b1 = 0.470142064105115090;
    const double a2 = 0.797426985353087322, b2 = 0.101286507323456339;
    const double w1 = 0.132394152788506181, w2 = 0.125939180544827153;
    r.bary = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, {a1, b1, b1}, {b1, a1, b1}, {b1, b1, a1},
              {a2, b2, b2}, {b2, a2, b2}, {b2, b2, a2}};
    r.weight = {0.225, w1, w1, w1, w2, w2, w2};
    return r;
  }();
  if (degree <= 2) return r2;
  if (degree <= 5) return r5;
  throw std::invalid_argument("triangle_rule: degree above 5 unsupported");
}

namespace {

// Calls fn(bary, weight_fraction) for every rule point of every subtriangle
// of a 2^k uniform split; barycentrics refer to the parent element.
template <class Fn>
void for_each_quad_point(const TriangleRule &rule, int k, Fn &&fn) {
  const int n = 1 << k;
  const double inv = 1.0 / n, wscale = inv * inv;
  auto emit = [&](const std::array<double, 3> &p0, const std::array<double, 3> &p1,
                  const std::array<double, 3> &p2) {
    for (std::size_t q = 0; q < rule.weight.size(); ++q) {
      const auto &l = rule.bary[q];
      std::array<double, 3> b{};
      for (int c = 0; c < 3; ++c) b[c] = l[0] * p0[c] + l[1] * p1[c] + l[2] * p2[c];
      fn(b, rule.weight[q] * wscale);
    }
  };
  auto node = [&](int i, int j) {
    return std::array<double, 3>{1.0 - (i + j) * inv, i * inv, j * inv};
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; i + j < n; ++j) {
      emit(node(i, j), node(i + 1, j), node(i, j + 1));
      if (i + j < n - 1) emit(node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
    }
}

}  // namespace

LoadSet assemble_bulk_load(const BulkMesh &m, const std::vector<Vec2> &x,
                           const std::vector<const std::vector<double> *> &fields,
                           const PointKinetics &kin, const QuadratureSpec &q, bool jacobian) {
  const int ns = static_cast<int>(fields.size());
  const int nn = m.node_count();
  LoadSet out;
  out.F.assign(ns, std::vector<double>(nn, 0.0));
  if (jacobian)
    for (int i = 0; i < ns * ns; ++i) out.J.emplace_back(m.pattern);
  const auto &rule = triangle_rule(q.degree);
  std::vector<double> s(ns), f(ns), jac(static_cast<std::size_t>(ns) * ns);
  for (std::size_t e = 0; e < m.topo.triangles.size(); ++e) {
    const auto &t = m.topo.triangles[e];
    const Vec2 &p0 = x[t[0]], &p1 = x[t[1]], &p2 = x[t[2]];
    const double area = 0.5 * cross(p1 - p0, p2 - p0);
    if (!(area > 0.0)) throw NumericalError("assembly", "degenerate or inverted element");
    const int k = q.subdivisions ? q.subdivisions(p0, p1, p2) : 0;
    for_each_quad_point(rule, k, [&](const std::array<double, 3> &b, double w) {
      const Vec2 xq = b[0] * p0 + b[1] * p1 + b[2] * p2;
      for (int p = 0; p < ns; ++p) {
        const auto &fld = *fields[p];
        s[p] = b[0] * fld[t[0]] + b[1] * fld[t[1]] + b[2] * fld[t[2]];
      }
      kin(xq, s.data(), f.data(), jacobian ? jac.data() : nullptr);
      const double wa = w * area;
      for (int p = 0; p < ns; ++p)
        for (int a = 0; a < 3; ++a) out.F[p][t[a]] += wa * f[p] * b[a];
      if (jacobian)
        for (int pq = 0; pq < ns * ns; ++pq) {
          if (jac[pq] == 0.0) continue;
          auto &v = out.J[pq].values();
          for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c) v[m.slots[e][a * 3 + c]] += wa * jac[pq] * b[a] * b[c];
        }
    });
  }
  return out;
}

std::vector<double> assemble_load(const BulkMesh &m, const std::vector<Vec2> &x,
                                  const std::function<double(const Vec2 &)> &f,
                                  const QuadratureSpec &q) {
  PointKinetics kin = [&f](const Vec2 &p, const double *, double *out, double *) { out[0] = f(p); };
  std::vector<double> dummy(m.node_count(), 0.0);
  return assemble_bulk_load(m, x, {&dummy}, kin, q, false).F[0];
}

std::vector<double> assemble_surface_load(const CurveMesh &cm, const std::vector<Vec2> &x,
                                          const std::function<double(const Vec2 &)> &f) {
  std::vector<double> F(cm.n, 0.0);
  for (int i = 0; i < cm.n; ++i) {
    const int j = (i + 1) % cm.n;
    const double h = norm(x[j] - x[i]);
    for (double xi : kGauss2) {
      const double v = f((1.0 - xi) * x[i] + xi * x[j]);
      F[i] += 0.5 * h * v * (1.0 - xi);
      F[j] += 0.5 * h * v * xi;
    }
  }
  return F;
}

CouplingSet assemble_coupling(const BulkMesh &m, const std::vector<Vec2> &x,
                              const std::vector<const std::vector<double> *> &bulk,
                              const std::vector<const std::vector<double> *> &surf,
                              const std::vector<const std::vector<double> *> &extra,
                              const CouplingKinetics &kin, bool jacobian) {
  const auto &loop = m.topo.inner_loop;
  const int n = static_cast<int>(loop.size());
  const int nb = static_cast<int>(bulk.size()), ns = static_cast<int>(surf.size()),
            ne = static_cast<int>(extra.size());
  CouplingSet out;
  out.bulk.assign(nb, std::vector<double>(m.node_count(), 0.0));
  out.surf.assign(ns, std::vector<double>(n, 0.0));
  if (jacobian)
    for (int i = 0; i < nb * nb; ++i) out.J.emplace_back(m.pattern);
  std::vector<double> vb(nb), vs(ns), ve(ne), ob(nb), os(ns), jb(static_cast<std::size_t>(nb) * nb);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const int gi = loop[i], gj = loop[j];
    const double h = norm(x[gj] - x[gi]);
    for (double xi : kGauss2) {
      const double phi[2] = {1.0 - xi, xi};
      const Vec2 xq = phi[0] * x[gi] + phi[1] * x[gj];
      for (int p = 0; p < nb; ++p) vb[p] = phi[0] * (*bulk[p])[gi] + phi[1] * (*bulk[p])[gj];
      for (int p = 0; p < ns; ++p) vs[p] = phi[0] * (*surf[p])[i] + phi[1] * (*surf[p])[j];
      for (int p = 0; p < ne; ++p) ve[p] = phi[0] * (*extra[p])[i] + phi[1] * (*extra[p])[j];
      std::fill(ob.begin(), ob.end(), 0.0);
      std::fill(os.begin(), os.end(), 0.0);
      std::fill(jb.begin(), jb.end(), 0.0);
      kin(xq, vb.data(), vs.data(), ve.data(), ob.data(), os.data(), jacobian ? jb.data() : nullptr);
      const double w = 0.5 * h;
      for (int p = 0; p < nb; ++p) {
        out.bulk[p][gi] += w * ob[p] * phi[0];
        out.bulk[p][gj] += w * ob[p] * phi[1];
      }
      for (int p = 0; p < ns; ++p) {
        out.surf[p][i] += w * os[p] * phi[0];
        out.surf[p][j] += w * os[p] * phi[1];
      }
      if (jacobian)
        for (int pq = 0; pq < nb * nb; ++pq) {
          if (jb[pq] == 0.0) continue;
          auto &v = out.J[pq].values();
          const auto &s = m.loop_slots[i];
          for (int a = 0; a < 2; ++a)
            for (int c = 0; c < 2; ++c) v[s[a * 2 + c]] += w * jb[pq] * phi[a] * phi[c];
        }
    }
  }
  return out;
}

std::vector<Vec2> membrane_velocity(const CurveState &curve, const std::vector<Vec2> &w,
                                    const std::vector<double> &mt) {
  std::vector<Vec2> u(curve.size());
  for (int i = 0; i < curve.size(); ++i)
    u[i] = dot(w[i], curve.normal[i]) * curve.normal[i] + (mt.empty() ? 0.0 : mt[i]) * curve.tangent[i];
  return u;
}

}  // namespace morphosim
