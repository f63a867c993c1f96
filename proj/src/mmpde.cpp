#include "morphosim/mmpde.hpp"

#include <algorithm>
#include <string>

namespace morphosim {

namespace {

struct RefElement {
  double area;
  Vec2 grad[3];  // d phi / d(xi, eta)
};

RefElement ref_element(const Triangulation &comp, std::size_t e) {
  const auto &t = comp.triangles[e];
  const Vec2 &p0 = comp.nodes[t[0]], &p1 = comp.nodes[t[1]], &p2 = comp.nodes[t[2]];
  const double a2 = cross(p1 - p0, p2 - p0);
  if (!(a2 > 0.0)) throw NumericalError("mmpde", "computational mesh has a degenerate element");
  RefElement r;
  r.area = 0.5 * a2;
  const Vec2 *p[3] = {&p0, &p1, &p2};
  for (int i = 0; i < 3; ++i) {
    const Vec2 &pj = *p[(i + 1) % 3];
    const Vec2 &pk = *p[(i + 2) % 3];
    r.grad[i] = {(pj.y - pk.y) / a2, (pk.x - pj.x) / a2};
  }
  return r;
}

}  // namespace

MmpdeCoefficients compute_coefficients(const Triangulation &comp, const std::vector<Vec2> &phys) {
  const std::size_t ne = comp.triangles.size();
  MmpdeCoefficients c;
  c.a.resize(ne);
  c.b.resize(ne);
  c.c.resize(ne);
  c.d.assign(ne, 0.0);
  c.e.assign(ne, 0.0);
  c.J.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto r = ref_element(comp, e);
    const auto &t = comp.triangles[e];
    Vec2 dxi, deta;  // (x_xi, y_xi), (x_eta, y_eta)
    for (int k = 0; k < 3; ++k) {
      dxi += r.grad[k].x * phys[t[k]];
      deta += r.grad[k].y * phys[t[k]];
    }
    const double J = dxi.x * deta.y - deta.x * dxi.y;
    if (!(J > 0.0)) throw NumericalError("mmpde", "tangled element " + std::to_string(e));
    const double J2 = J * J;
    c.J[e] = J;
    c.a[e] = dot(deta, deta) / J2;
    c.b[e] = -2.0 * dot(dxi, deta) / J2;
    c.c[e] = dot(dxi, dxi) / J2;
  }
  return c;
}

std::vector<double> recover_field(const Triangulation &comp, const std::vector<double> &elem) {
  std::vector<double> num(comp.nodes.size(), 0.0), den(comp.nodes.size(), 0.0);
  for (std::size_t e = 0; e < comp.triangles.size(); ++e) {
    const auto &t = comp.triangles[e];
    const double area = 0.5 * cross(comp.nodes[t[1]] - comp.nodes[t[0]], comp.nodes[t[2]] - comp.nodes[t[0]]);
    for (int k = 0; k < 3; ++k) {
      num[t[k]] += area * elem[e];
      den[t[k]] += area;
    }
  }
  for (std::size_t i = 0; i < num.size(); ++i) {
    if (!(den[i] > 0.0)) throw NumericalError("mmpde", "isolated node " + std::to_string(i));
    num[i] /= den[i];
  }
  return num;
}

NodalCoefficients recover_coefficients(const MmpdeCoefficients &c, const Triangulation &comp) {
  return {recover_field(comp, c.a), recover_field(comp, c.b), recover_field(comp, c.c),
          recover_field(comp, c.d), recover_field(comp, c.e)};
}

double min_jacobian(const Triangulation &comp, const std::vector<Vec2> &phys) {
  double jmin = 1e300;
  for (const auto &t : comp.triangles) {
    const double a = cross(comp.nodes[t[1]] - comp.nodes[t[0]], comp.nodes[t[2]] - comp.nodes[t[0]]);
    const double b = cross(phys[t[1]] - phys[t[0]], phys[t[2]] - phys[t[0]]);
    jmin = std::min(jmin, b / a);
  }
  return jmin;
}

std::vector<Vec2> mmpde_step(const BulkMesh &m, const std::vector<Vec2> &phys,
                             const std::vector<int> &dnodes, const std::vector<Vec2> &dvals,
                             const MmpdeParams &p) {
  if (!(p.tau_hat > 0.0) || !(p.dt > 0.0)) throw ConfigError("mmpde: tau_hat and dt must be positive");
  if (dnodes.size() != dvals.size()) throw std::invalid_argument("mmpde_step: dirichlet size mismatch");
  const auto &comp = m.topo;
  const int nn = m.node_count();
  {
    std::vector<char> fixed(nn, 0);
    for (int i : dnodes) fixed.at(i) = 1;
    for (int i : comp.inner_loop)
      if (!fixed[i]) throw std::invalid_argument("mmpde_step: boundary node without Dirichlet data");
    for (int i : comp.outer_loop)
      if (!fixed[i]) throw std::invalid_argument("mmpde_step: boundary node without Dirichlet data");
  }
  const auto coef = compute_coefficients(comp, phys);
  const auto nc = recover_coefficients(coef, comp);
  std::vector<double> ph(nn, 1.0);
  if (p.p_hat)
    for (int i = 0; i < nn; ++i) ph[i] = p.p_hat(nc.a[i], nc.b[i], nc.c[i]);

  SparseMatrix A(m.pattern);
  auto &v = A.values();
  std::vector<double> rx(nn, 0.0), ry(nn, 0.0);
  const double s = p.tau_hat / p.dt;
  for (std::size_t e = 0; e < comp.triangles.size(); ++e) {
    const auto r = ref_element(comp, e);
    const auto &t = comp.triangles[e];
    const double K = r.area;
    // Elementwise constant gradients and means of the recovered P1 fields.
    Vec2 ga, gb, gc;
    double ma = 0, mb = 0, mc = 0, psum = 0;
    for (int k = 0; k < 3; ++k) {
      ga += nc.a[t[k]] * r.grad[k];
      gb += nc.b[t[k]] * r.grad[k];
      gc += nc.c[t[k]] * r.grad[k];
      ma += nc.a[t[k]] / 3.0;
      mb += nc.b[t[k]] / 3.0;
      mc += nc.c[t[k]] / 3.0;
      psum += ph[t[k]];
    }
    const double dsum = nc.d[t[0]] + nc.d[t[1]] + nc.d[t[2]];
    const double esum = nc.e[t[0]] + nc.e[t[1]] + nc.e[t[2]];
    for (int j = 0; j < 3; ++j) {
      const Vec2 &gj = r.grad[j];
      // Test function phi_j; the weights of x_xi and x_eta in the weak form.
      const double wxi = ga.x * K / 3.0 + ma * gj.x * K + 0.5 * (gb.y * K / 3.0 + mb * gj.y * K);
      const double weta = gc.y * K / 3.0 + mc * gj.y * K + 0.5 * (gb.x * K / 3.0 + mb * gj.x * K);
      const double dj = K * (dsum + nc.d[t[j]]) / 12.0;
      const double ej = K * (esum + nc.e[t[j]]) / 12.0;
      for (int i = 0; i < 3; ++i) {
        const Vec2 &gi = r.grad[i];
        // p-hat interpolated: int p phi_i phi_j = K/60 * (...) for P1 p.
        double pm;
        if (i == j) pm = K * (2.0 * psum + 4.0 * ph[t[i]]) / 60.0;
        else pm = K * (psum + ph[t[i]] + ph[t[j]]) / 60.0;
        v[m.slots[e][j * 3 + i]] += s * pm + gi.x * wxi + gi.y * weta - (dj * gi.x + ej * gi.y);
        rx[t[j]] += s * pm * phys[t[i]].x;
        ry[t[j]] += s * pm * phys[t[i]].y;
      }
    }
  }
  std::vector<double> vx(dvals.size()), vy(dvals.size());
  for (std::size_t k = 0; k < dvals.size(); ++k) {
    vx[k] = dvals[k].x;
    vy[k] = dvals[k].y;
  }
  SparseMatrix Ay = A;
  A.eliminate_dirichlet(dnodes, vx, rx);
  Ay.eliminate_dirichlet(dnodes, vy, ry);
  LinearSolver solver;
  std::vector<double> sx, sy;
  try {
    solver.factorize(A);
    sx = solver.solve(rx);
    sy = solver.solve(ry);
  } catch (const NumericalError &err) {
    throw NumericalError("mmpde", err.what());
  }
  std::vector<Vec2> out(nn);
  for (int i = 0; i < nn; ++i) out[i] = {sx[i], sy[i]};
  for (std::size_t k = 0; k < dnodes.size(); ++k) out[dnodes[k]] = dvals[k];
  if (!(min_jacobian(comp, out) > 0.0)) throw NumericalError("mmpde", "mesh tangled; reduce dt or remesh");
  return out;
}

std::vector<Vec2> translate_exterior_frame(const Triangulation &ext, const std::vector<Vec2> &phys,
                                           const Vec2 &shift) {
  std::vector<Vec2> out;
  out.reserve(ext.outer_loop.size());
  for (int i : ext.outer_loop) out.push_back(phys[i] + shift);
  return out;
}

}  // namespace morphosim
