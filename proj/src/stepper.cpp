#include "morphosim/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "morphosim/mmpde.hpp"

namespace morphosim {

using Field = std::vector<double>;
using FieldSet = std::vector<Field>;

void SchemeConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (!(T >= dt) || !std::isfinite(T)) throw ConfigError("T must be at least dt");
  if (!(picard_tol > 0.0)) throw ConfigError("picard_tol must be positive");
  if (picard_max_iters < 1) throw ConfigError("picard_max_iters must be at least 1");
}

int SchemeConfig::steps() const { return static_cast<int>(std::lround(T / dt)); }

namespace {

Vec2 project_to_circle(const Vec2 &p, double r) { return (r / norm(p)) * p; }

Vec2 project_to_star(const Vec2 &p) {
  const Vec2 c = star_center();
  const Vec2 d = p - c;
  const double th = std::atan2(d.y, d.x);
  return c + (star_radius(th) / norm(d)) * d;
}

double loop_diameter(const Triangulation &t, const std::vector<int> &loop) {
  double d = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i)
    for (std::size_t j = i + 1; j < loop.size(); ++j)
      d = std::max(d, norm(t.nodes[loop[i]] - t.nodes[loop[j]]));
  return d;
}

std::vector<Vec2> nodal_velocity(const VelocitySpec &s, const std::vector<Vec2> &w) {
  switch (s.kind) {
    case VelocityKind::constant: return std::vector<Vec2>(w.size(), s.value);
    case VelocityKind::equals_ale: return w;
    default: return std::vector<Vec2>(w.size(), Vec2{});
  }
}

// Normal part follows the mesh so that (w - u_Gamma) . n vanishes nodewise.
std::vector<Vec2> gamma_velocity(const VelocitySpec &s, const CurveState &curve,
                                 const std::vector<Vec2> &w) {
  std::vector<double> mt(curve.size(), 0.0);
  for (int i = 0; i < curve.size(); ++i) {
    if (s.kind == VelocityKind::constant) mt[i] = dot(s.value, curve.tangent[i]);
    else if (s.kind == VelocityKind::equals_ale) mt[i] = dot(w[i], curve.tangent[i]);
  }
  return membrane_velocity(curve, w, mt);
}

std::vector<const Field *> ptrs(const FieldSet &f) {
  std::vector<const Field *> p;
  for (const auto &v : f) p.push_back(&v);
  return p;
}

double inf_norm(const Field &v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::abs(a));
  return m;
}

void axpy(double a, const Field &x, Field &y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// Membrane kinetics at 2-point Gauss nodes of each curve segment.
FieldSet surface_kinetics_load(const std::vector<Vec2> &x, const FieldSet &fields,
                               const PointKinetics &kin) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(fields.size());
  FieldSet out(m, Field(n, 0.0));
  if (!kin || m == 0) return out;
  static constexpr double g[2] = {0.21132486540518711775, 0.78867513459481288225};
  std::vector<double> s(m), f(m);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const double h = norm(x[j] - x[i]);
    for (double xi : g) {
      for (int p = 0; p < m; ++p) s[p] = (1.0 - xi) * fields[p][i] + xi * fields[p][j];
      kin((1.0 - xi) * x[i] + xi * x[j], s.data(), f.data(), nullptr);
      for (int p = 0; p < m; ++p) {
        out[p][i] += 0.5 * h * f[p] * (1.0 - xi);
        out[p][j] += 0.5 * h * f[p] * xi;
      }
    }
  }
  return out;
}

struct BulkLevel {
  const SparseMatrix *M = nullptr;
  const SparseMatrix *K1 = nullptr;
  SparseMatrix L;  // B - A
};

struct SurfaceLevel {
  SurfaceOperators ops;
};

// Reaction terms of one bulk group at t^{n+1} as a function of the bulk values.
using BulkReaction = std::function<void(const FieldSet &C, bool jac, FieldSet &N, std::vector<SparseMatrix> &J)>;

struct BulkSolveResult {
  FieldSet C;
  int iterations = 0;
  double residual = 0.0;
};

struct Dirichlet {
  std::vector<int> nodes;
  std::vector<double> values;  // one per species
};

// Solves sum_q S_pq C_q = b_p with Dirichlet rows shared by every species.
class BlockSystem {
 public:
  BlockSystem(const SparseMatrix &S, int nsp, int nn, const Dirichlet *dir) : nsp_(nsp), nn_(nn) {
    SparseMatrix A = S;
    if (dir && !dir->nodes.empty()) {
      Field z(static_cast<std::size_t>(nsp) * nn, 0.0);
      for (int p = 0; p < nsp; ++p)
        for (int d : dir->nodes) {
          nodes_.push_back(p * nn + d);
          vals_.push_back(dir->values[p]);
          z[p * nn + d] = dir->values[p];
        }
      corr_ = A.multiply(z);
      Field dummy(z.size(), 0.0);
      A.eliminate_dirichlet(nodes_, vals_, dummy);
    }
    solver_.factorize(A);
  }

  FieldSet solve(const FieldSet &b) const {
    Field rhs(static_cast<std::size_t>(nsp_) * nn_);
    for (int p = 0; p < nsp_; ++p) std::copy(b[p].begin(), b[p].end(), rhs.begin() + p * nn_);
    if (!corr_.empty()) {
      for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= corr_[i];
      for (std::size_t k = 0; k < nodes_.size(); ++k) rhs[nodes_[k]] = vals_[k];
    }
    const Field sol = solver_.solve(rhs);
    FieldSet out(nsp_, Field(nn_));
    for (int p = 0; p < nsp_; ++p) std::copy(sol.begin() + p * nn_, sol.begin() + (p + 1) * nn_, out[p].begin());
    return out;
  }

 private:
  int nsp_, nn_;
  LinearSolver solver_;
  std::vector<int> nodes_;
  std::vector<double> vals_;
  Field corr_;
};

BulkSolveResult solve_bulk_cn(const BulkLevel &l0, const BulkLevel &l1, const std::vector<double> &D,
                              double dt, const FieldSet &Cn, const FieldSet &N0,
                              const BulkReaction &react1, const Dirichlet *dir, double tol, int max_iters) {
  const int nsp = static_cast<int>(Cn.size());
  const int nn = static_cast<int>(Cn[0].size());
  std::vector<SparseMatrix> A(nsp);
  FieldSet rhs(nsp);
  double scale = 0.0;
  for (int p = 0; p < nsp; ++p) {
    const SparseMatrix L0 = SparseMatrix::combine(1.0, l0.L, D[p], *l0.K1);
    const SparseMatrix L1 = SparseMatrix::combine(1.0, l1.L, D[p], *l1.K1);
    A[p] = SparseMatrix::combine(1.0, *l1.M, 0.5 * dt, L1);
    rhs[p] = SparseMatrix::combine(1.0, *l0.M, -0.5 * dt, L0).multiply(Cn[p]);
    axpy(0.5 * dt, N0[p], rhs[p]);
    scale = std::max(scale, inf_norm(rhs[p]));
  }
  scale = std::max(scale, 1e-300);

  FieldSet N;
  std::vector<SparseMatrix> J;
  react1(Cn, true, N, J);
  std::vector<SparseMatrix> diag(nsp), off;
  std::vector<std::vector<const SparseMatrix *>> blocks(nsp, std::vector<const SparseMatrix *>(nsp, nullptr));
  off.reserve(static_cast<std::size_t>(nsp) * nsp);
  for (int p = 0; p < nsp; ++p)
    for (int q = 0; q < nsp; ++q) {
      const SparseMatrix *Jpq = J.empty() ? nullptr : &J[p * nsp + q];
      if (p == q) {
        diag[p] = Jpq ? SparseMatrix::combine(1.0, A[p], -0.5 * dt, *Jpq) : A[p];
        blocks[p][q] = &diag[p];
      } else if (Jpq && Jpq->max_abs() > 0.0) {
        off.push_back(SparseMatrix::combine(-0.5 * dt, *Jpq, 0.0, *Jpq));
        blocks[p][q] = &off.back();
      }
    }
  const SparseMatrix S = nsp == 1 ? diag[0] : SparseMatrix::block(blocks);
  const BlockSystem sys(S, nsp, nn, dir);

  std::vector<char> fixed(nn, 0);
  if (dir)
    for (int d : dir->nodes) fixed[d] = 1;

  BulkSolveResult res;
  FieldSet C = Cn;
  for (int it = 1; it <= max_iters; ++it) {
    FieldSet b = rhs;
    for (int p = 0; p < nsp; ++p) {
      axpy(0.5 * dt, N[p], b[p]);
      if (!J.empty())
        for (int q = 0; q < nsp; ++q) axpy(-0.5 * dt, J[p * nsp + q].multiply(C[q]), b[p]);
    }
    C = sys.solve(b);
    std::vector<SparseMatrix> none;
    react1(C, false, N, none);
    double r = 0.0;
    for (int p = 0; p < nsp; ++p) {
      Field ac = A[p].multiply(C[p]);
      for (int i = 0; i < nn; ++i)
        if (!fixed[i]) r = std::max(r, std::abs(ac[i] - rhs[p][i] - 0.5 * dt * N[p][i]));
    }
    res.iterations = it;
    res.residual = r / scale;
    if (r <= tol * scale) {
      res.C = std::move(C);
      return res;
    }
  }
  throw NumericalError("bulk", "Picard iteration did not converge after " + std::to_string(max_iters) +
                                   " iterations (relative residual " + std::to_string(res.residual) + ")");
}

FieldSet solve_bulk_imex(const BulkLevel &l1, const std::vector<double> &D, double dt, const BulkLevel &l0,
                         const FieldSet &Cn, const FieldSet &N0, const Dirichlet *dir) {
  const int nsp = static_cast<int>(Cn.size());
  const int nn = static_cast<int>(Cn[0].size());
  FieldSet out(nsp);
  for (int p = 0; p < nsp; ++p) {
    const SparseMatrix L1 = SparseMatrix::combine(1.0, l1.L, D[p], *l1.K1);
    const SparseMatrix A = SparseMatrix::combine(1.0, *l1.M, dt, L1);
    Field b = l0.M->multiply(Cn[p]);
    axpy(dt, N0[p], b);
    Dirichlet one;
    if (dir) one = {dir->nodes, {dir->values[p]}};
    const BlockSystem sys(A, 1, nn, dir ? &one : nullptr);
    out[p] = sys.solve({b})[0];
  }
  return out;
}

void check_column_sums(const SparseMatrix &A, const char *what) {
  const double scale = std::max(A.max_abs(), 1e-300);
  for (double s : A.column_sums())
    if (std::abs(s) > 1e-12 * scale)
      throw NumericalError("operators", std::string(what) + " column sum " + std::to_string(s / scale));
}

}  // namespace

DomainPair build_meshes(const MeshSpec &spec) {
  Triangulation interior;
  if (spec.kind == MeshKind::star) {
    if (!(spec.star_h > 0.0)) throw ConfigError("star_h must be positive");
    interior = generate_star_mesh(spec.star_h);
    for (int k = 0; k < spec.refine_levels; ++k) interior = refine_uniform(interior, project_to_star);
  } else {
    if (!(spec.radius > 0.0)) throw ConfigError("radius must be positive");
    if (spec.n_boundary < 8) throw ConfigError("n_boundary must be at least 8");
    const double h = spec.width_factor * 2.0 * kPi * spec.radius / spec.n_boundary;
    interior = generate_circle_mesh(spec.radius, spec.n_boundary, h);
    const double R = spec.radius;
    for (int k = 0; k < spec.refine_levels; ++k)
      interior = refine_uniform(interior, [R](const Vec2 &p) { return project_to_circle(p, R); });
  }
  DomainPair d;
  if (!spec.exterior) {
    d.interior = std::move(interior);
    d.shared_curve_map.resize(d.interior.inner_loop.size());
    return d;
  }
  if (spec.refine_levels > 0) throw ConfigError("uniform refinement is not supported with an exterior mesh");
  const auto inner = loop_points(interior, interior.inner_loop);
  const double h_in = polygon_perimeter(inner) / static_cast<double>(inner.size());
  double grading = spec.grading;
  if (!(grading > 0.0)) grading = std::max(1.0, 2.0 * kPi * spec.outer_radius / (spec.n_outer * h_in));
  auto exterior = generate_annulus_mesh(inner, spec.outer_radius, grading, spec.n_outer);
  return make_domain_pair(std::move(interior), std::move(exterior));
}

struct Simulation::Impl {
  Problem prob;
  SchemeConfig cfg;
  StepperOptions opt;
  BulkMesh mi;
  std::optional<BulkMesh> me;
  CurveMesh cm;
  SystemState st;
  double curve_tau = 1.0, tau_int = 1.0, tau_ext = 1.0;
  SparseMatrix Mi, Ki, Me, Ke;  // at the current positions
  MassLedger ledger0, ledger_prev;
  QuadratureSpec quad_ext;

  Impl(Problem p, DomainPair meshes, const SchemeConfig &c, const StepperOptions &o)
      : prob(std::move(p)), cfg(c), opt(o) {
    cfg.validate();
    auto &sys = prob.system;
    sys.validate();
    const bool need_ext = sys.n_l > 0 || sys.n_ls > 0;
    if (need_ext && !meshes.exterior) throw ConfigError("exterior species need an exterior mesh");
    validate_mesh(meshes.interior);
    mi = make_bulk_mesh(meshes.interior);
    if (meshes.exterior) {
      validate_mesh(*meshes.exterior);
      me = make_bulk_mesh(*meshes.exterior);
    }
    st.curve = extract_curve(mi.topo);
    cm = make_curve_mesh(st.curve.size());
    st.x_int = mi.topo.nodes;
    if (me) st.x_ext = me->topo.nodes;

    const double area = curve_area(st.curve), perim = curve_perimeter(st.curve);
    bind_geometry(prob, area, perim);
    curve_tau = prob.motion.curve_tau > 0.0 ? prob.motion.curve_tau : 1.0 / (perim * perim);
    auto mmpde_tau = [&](const Triangulation &t, const std::vector<int> &loop) {
      if (prob.motion.mmpde_tau > 0.0) return prob.motion.mmpde_tau;
      const double d = loop_diameter(t, loop);
      return 0.1 / (d * d);
    };
    tau_int = mmpde_tau(mi.topo, mi.topo.inner_loop);
    if (me) tau_ext = mmpde_tau(me->topo, me->topo.outer_loop);

    if (prob.motion.cortex) {
      if (!prob.wave) throw ConfigError("cortical tension needs wave-pinning parameters");
      auto &cx = st.cortex;
      cx.lambda0 = prob.wave->R0 * prob.motion.K_prot * prob.wave->s_l;
      cx.lambda = cx.lambda0;
      cx.A0 = area;
      cx.upsilon = prob.motion.upsilon;
      cx.beta_relax = prob.motion.beta_relax;
    }
    if (prob.motion.law == CurveLaw::membrane && sys.n_cs < 1)
      throw ConfigError("membrane law needs a surface species");
    if (prob.source && prob.ligand) {
      auto src = prob.source;
      quad_ext = gaussian_source_quadrature([src] { return src->position(); }, std::sqrt(prob.ligand->sigma_l));
    }

    auto init = [](const std::vector<SpaceTimeField> &f, const std::vector<Vec2> &x) {
      FieldSet out;
      for (const auto &fn : f) {
        Field v(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) v[i] = fn(x[i], 0.0);
        out.push_back(std::move(v));
      }
      return out;
    };
    st.c = init(sys.c_init, st.x_int);
    st.cs = init(sys.cs_init, st.curve.x);
    st.l = init(sys.l_init, st.x_ext);
    st.ls = init(sys.ls_init, st.curve.x);
    st.w_int.assign(st.x_int.size(), Vec2{});
    st.w_ext.assign(st.x_ext.size(), Vec2{});
    st.w_curve.assign(st.curve.size(), Vec2{});
    if (sys.outer_bc == OuterBc::dirichlet && me)
      for (int i : me->topo.outer_loop)
        for (int k = 0; k < sys.n_l; ++k) st.l[k][i] = sys.l_dirichlet[k];

    Mi = assemble_mass(mi, st.x_int);
    Ki = assemble_stiffness(mi, st.x_int, 1.0);
    if (me) {
      Me = assemble_mass(*me, st.x_ext);
      Ke = assemble_stiffness(*me, st.x_ext, 1.0);
    }
    ledger0 = make_ledger(assemble_surface_operators(cm, st.curve.x, Field(st.curve.size(), 0.0)).M);
    ledger_prev = ledger0;
  }

  MassLedger make_ledger(const SparseMatrix &Ms) const {
    MassLedger L;
    L.time = st.time;
    for (const auto &c : st.c) L.bulk_interior.push_back(total_mass(Mi, c));
    for (const auto &c : st.cs) L.surface_interior.push_back(total_mass(Ms, c));
    for (const auto &c : st.l) L.bulk_exterior.push_back(total_mass(Me, c));
    for (const auto &c : st.ls) L.surface_exterior.push_back(total_mass(Ms, c));
    finalize_ledger(L);
    return L;
  }

  NormalVelocityLaw curve_law() const {
    const auto &mo = prob.motion;
    switch (mo.law) {
      case CurveLaw::translate: {
        const Vec2 ub = mo.u_b;
        const auto &cv = st.curve;
        NormalVelocityLaw law;
        law.beta = [ub, &cv](int i, const Vec2 &, double) { return dot(ub, cv.normal[i]); };
        return law;
      }
      case CurveLaw::membrane: return membrane_velocity_law(st.cs[0], st.cortex, mo.K_prot);
      default: return {};
    }
  }

  NodeField curve_tangential() const {
    const auto &mo = prob.motion;
    const Vec2 ub = mo.law == CurveLaw::translate ? mo.u_b : Vec2{};
    const double A = mo.extra_tangential_amplitude, f = mo.extra_tangential_frequency;
    const double N = static_cast<double>(st.curve.size());
    const auto &cv = st.curve;
    return [ub, A, f, N, &cv](int i, const Vec2 &, double t) {
      double v = dot(ub, cv.tangent[i]);
      if (A != 0.0) v += A * std::sin(2.0 * kPi * f * t + 2.0 * kPi * i / N);
      return v;
    };
  }

  // Coupling at one level: R for bulk, R_s for the membrane, and optionally dR/dC.
  CouplingSet interior_coupling(const std::vector<Vec2> &x, const FieldSet &c, const FieldSet &cs,
                                const FieldSet &ls, bool jac) const {
    const auto &sys = prob.system;
    if (!sys.interior_coupling) {
      CouplingSet z;
      z.bulk.assign(sys.n_c, Field(x.size(), 0.0));
      z.surf.assign(sys.n_cs, Field(st.curve.size(), 0.0));
      return z;
    }
    return assemble_coupling(mi, x, ptrs(c), ptrs(cs), ptrs(ls), sys.interior_coupling, jac);
  }

  CouplingSet exterior_coupling(const std::vector<Vec2> &x, const FieldSet &l, const FieldSet &ls,
                                bool jac) const {
    const auto &sys = prob.system;
    if (!sys.exterior_coupling) {
      CouplingSet z;
      z.bulk.assign(sys.n_l, Field(x.size(), 0.0));
      z.surf.assign(sys.n_ls, Field(st.curve.size(), 0.0));
      return z;
    }
    return assemble_coupling(*me, x, ptrs(l), ptrs(ls), {}, sys.exterior_coupling, jac);
  }

  LoadSet bulk_load(const BulkMesh &m, const std::vector<Vec2> &x, const FieldSet &C,
                    const PointKinetics &kin, const QuadratureSpec &q, bool jac) const {
    if (!kin) {
      LoadSet z;
      z.F.assign(C.size(), Field(x.size(), 0.0));
      return z;
    }
    return assemble_bulk_load(m, x, ptrs(C), kin, q, jac);
  }

  static FieldSet sum(const FieldSet &a, const FieldSet &b) {
    FieldSet out = a;
    for (std::size_t p = 0; p < a.size(); ++p) axpy(1.0, b[p], out[p]);
    return out;
  }

  // Predictor: (M_s^{n+1} + dt S^{n+1}) C~ = M_s^n C^n - dt (R_s^n - F_s^n).
  FieldSet predict(const SurfaceLevel &s0, const SurfaceLevel &s1, const std::vector<double> &D,
                   const FieldSet &Cn, const FieldSet &Rs0, const FieldSet &Fs0) const {
    const double dt = cfg.dt;
    FieldSet out(Cn.size());
    for (std::size_t q = 0; q < Cn.size(); ++q) {
      const SparseMatrix S1 = SparseMatrix::combine(D[q], s1.ops.K, -1.0, s1.ops.B);
      const SparseMatrix A = SparseMatrix::combine(1.0, s1.ops.M, dt, S1);
      Field b = s0.ops.M.multiply(Cn[q]);
      axpy(-dt, Rs0[q], b);
      axpy(dt, Fs0[q], b);
      try {
        out[q] = solve_sparse(A, b);
      } catch (const NumericalError &e) {
        throw NumericalError("predictor", e.what());
      }
    }
    return out;
  }

  // Corrector: (M_s^{n+1} + dt/2 S^{n+1}) C = (M_s^n - dt/2 S^n) C^n + dt/2 (F1 + F0 - R1 - R0).
  FieldSet correct(const SurfaceLevel &s0, const SurfaceLevel &s1, const std::vector<double> &D,
                   const FieldSet &Cn, const FieldSet &Rs0, const FieldSet &Rs1, const FieldSet &Fs0,
                   const FieldSet &Fs1) const {
    const double dt = cfg.dt;
    FieldSet out(Cn.size());
    for (std::size_t q = 0; q < Cn.size(); ++q) {
      const SparseMatrix S0 = SparseMatrix::combine(D[q], s0.ops.K, -1.0, s0.ops.B);
      const SparseMatrix S1 = SparseMatrix::combine(D[q], s1.ops.K, -1.0, s1.ops.B);
      const SparseMatrix A = SparseMatrix::combine(1.0, s1.ops.M, 0.5 * dt, S1);
      Field b = SparseMatrix::combine(1.0, s0.ops.M, -0.5 * dt, S0).multiply(Cn[q]);
      axpy(0.5 * dt, Fs1[q], b);
      axpy(0.5 * dt, Fs0[q], b);
      axpy(-0.5 * dt, Rs1[q], b);
      axpy(-0.5 * dt, Rs0[q], b);
      try {
        out[q] = solve_sparse(A, b);
      } catch (const NumericalError &e) {
        throw NumericalError("corrector", e.what());
      }
    }
    return out;
  }

  StepRecord advance() {
    const auto &sys = prob.system;
    const double dt = cfg.dt;
    const double t0 = st.time, t1 = t0 + dt;
    const bool cn = cfg.bulk_scheme == BulkScheme::crank_nicolson;
    StepRecord rec;

    // (1) membrane curve
    CurveMotionParams cp{curve_tau, dt, curve_tangential()};
    const CurveState curve0 = st.curve;
    CurveState curve1 = evolve_curve(curve0, curve_law(), cp, t0);

    // (2) cortical tension
    CortexState cortex1 = st.cortex;
    if (prob.motion.cortex) {
      const double A0 = curve_area(curve0), A1 = curve_area(curve1);
      cortex1 = cortical_tension_step(st.cortex, A0, (A1 - A0) / dt, dt);
    }

    // (3) bulk mesh motion
    const auto &loop_i = mi.topo.inner_loop;
    MmpdeParams mp;
    mp.dt = dt;
    mp.tau_hat = tau_int;
    const std::vector<Vec2> x0 = st.x_int;
    const std::vector<Vec2> x1 = mmpde_step(mi, x0, loop_i, curve1.x, mp);
    std::vector<Vec2> y1;
    if (me) {
      const Vec2 shift = polygon_centroid(curve1.x) - polygon_centroid(curve0.x);
      std::vector<int> dn = me->topo.inner_loop;
      std::vector<Vec2> dv = curve1.x;
      const auto outer = translate_exterior_frame(me->topo, st.x_ext, shift);
      dn.insert(dn.end(), me->topo.outer_loop.begin(), me->topo.outer_loop.end());
      dv.insert(dv.end(), outer.begin(), outer.end());
      mp.tau_hat = tau_ext;
      y1 = mmpde_step(*me, st.x_ext, dn, dv, mp);
    }

    // (4) ALE velocities
    const auto fi = make_ale_frame(x0, x1, dt);
    const auto fc = make_ale_frame(curve0.x, curve1.x, dt);
    std::vector<Vec2> w_ext1;
    if (me) w_ext1 = make_ale_frame(st.x_ext, y1, dt).w;
    const auto &wi0 = opt.lag_ale_velocity ? st.w_int : fi.w;
    const auto &wc0 = opt.lag_ale_velocity ? st.w_curve : fc.w;
    const auto &we0 = opt.lag_ale_velocity ? st.w_ext : w_ext1;

    // (5) operators at both levels
    const SparseMatrix Mi1 = assemble_mass(mi, x1);
    const SparseMatrix Ki1 = assemble_stiffness(mi, x1, 1.0);
    const auto ug0 = gamma_velocity(sys.u_gamma, curve0, wc0);
    const auto ug1 = gamma_velocity(sys.u_gamma, curve1, fc.w);
    auto bulk_level = [&](const BulkMesh &m, const std::vector<Vec2> &x, const std::vector<Vec2> &w,
                          const VelocitySpec &u, const CurveState &cv, const std::vector<Vec2> &wc,
                          const std::vector<Vec2> &ug, double orient, const SparseMatrix &M,
                          const SparseMatrix &K) {
      BulkLevel lv;
      lv.M = &M;
      lv.K1 = &K;
      const SparseMatrix B = assemble_advection_bulk(m, x, w, nodal_velocity(u, w));
      const SparseMatrix A = assemble_boundary_advection(m, cv, wc, ug, orient);
      rec.boundary_advection = std::max(rec.boundary_advection, A.max_abs());
      if (cfg.conservation_check) {
        check_column_sums(K, "stiffness");
        check_column_sums(B, "bulk advection");
      }
      lv.L = SparseMatrix::combine(1.0, B, -1.0, A);
      return lv;
    };
    const BulkLevel bi0 = bulk_level(mi, x0, wi0, sys.u_omega, curve0, wc0, ug0, 1.0, Mi, Ki);
    const BulkLevel bi1 = bulk_level(mi, x1, fi.w, sys.u_omega, curve1, fc.w, ug1, 1.0, Mi1, Ki1);
    SparseMatrix Me1, Ke1;
    BulkLevel be0, be1;
    if (me) {
      Me1 = assemble_mass(*me, y1);
      Ke1 = assemble_stiffness(*me, y1, 1.0);
      be0 = bulk_level(*me, st.x_ext, we0, sys.u_xi, curve0, wc0, ug0, -1.0, Me, Ke);
      be1 = bulk_level(*me, y1, w_ext1, sys.u_xi, curve1, fc.w, ug1, -1.0, Me1, Ke1);
    }
    SurfaceLevel s0{assemble_surface_operators(cm, curve0, wc0, ug0)};
    SurfaceLevel s1{assemble_surface_operators(cm, curve1, fc.w, ug1)};
    if (cfg.conservation_check) {
      check_column_sums(s1.ops.K, "surface stiffness");
      check_column_sums(s1.ops.B, "surface advection");
      if (rec.boundary_advection > 1e-12)
        throw NumericalError("operators", "boundary advection matrix does not vanish");
    }

    // (6) surface predictors: exterior first, then interior
    const FieldSet Fls0 = surface_kinetics_load(curve0.x, st.ls, sys.f_ls);
    const FieldSet Fcs0 = surface_kinetics_load(curve0.x, st.cs, sys.f_cs);
    CouplingSet G0, R0;
    if (me) G0 = exterior_coupling(st.x_ext, st.l, st.ls, false);
    R0 = interior_coupling(x0, st.c, st.cs, st.ls, false);
    FieldSet ls_pred, cs_pred;
    if (opt.predictor_uses_previous) {
      ls_pred = st.ls;
      cs_pred = st.cs;
    } else {
      ls_pred = predict(s0, s1, sys.D_ls, st.ls, G0.surf, Fls0);
      cs_pred = predict(s0, s1, sys.D_cs, st.cs, R0.surf, Fcs0);
    }

    // (7) bulk solves: exterior then interior
    FieldSet l1 = st.l, c1 = st.c;
    Dirichlet dir;
    const bool has_dir = me && sys.outer_bc == OuterBc::dirichlet;
    if (has_dir) dir = {me->topo.outer_loop, sys.l_dirichlet};
    if (sys.n_l > 0) {
      const LoadSet F0 = bulk_load(*me, st.x_ext, st.l, sys.f_l, quad_ext, false);
      const FieldSet N0 = sum(G0.bulk, F0.F);
      if (cn) {
        BulkReaction react = [&](const FieldSet &L, bool jac, FieldSet &N, std::vector<SparseMatrix> &J) {
          auto G = exterior_coupling(y1, L, ls_pred, jac);
          auto F = bulk_load(*me, y1, L, sys.f_l, quad_ext, jac);
          N = sum(G.bulk, F.F);
          J.clear();
          if (jac) {
            const int n = sys.n_l;
            for (int k = 0; k < n * n; ++k) {
              const SparseMatrix *a = G.J.empty() ? nullptr : &G.J[k];
              const SparseMatrix *b = F.J.empty() ? nullptr : &F.J[k];
              if (a && b) J.push_back(SparseMatrix::combine(1.0, *a, 1.0, *b));
              else if (a) J.push_back(*a);
              else if (b) J.push_back(*b);
              else J.emplace_back(me->pattern);
            }
          }
        };
        auto r = solve_bulk_cn(be0, be1, sys.D_l, dt, st.l, N0, react, has_dir ? &dir : nullptr,
                               cfg.picard_tol, cfg.picard_max_iters);
        l1 = std::move(r.C);
        rec.picard_iterations = std::max(rec.picard_iterations, r.iterations);
        rec.picard_residual = std::max(rec.picard_residual, r.residual);
      } else {
        l1 = solve_bulk_imex(be1, sys.D_l, dt, be0, st.l, N0, has_dir ? &dir : nullptr);
      }
    }
    if (sys.n_c > 0) {
      const LoadSet F0 = bulk_load(mi, x0, st.c, sys.f_c, {}, false);
      const FieldSet N0 = sum(R0.bulk, F0.F);
      if (cn) {
        BulkReaction react = [&](const FieldSet &C, bool jac, FieldSet &N, std::vector<SparseMatrix> &J) {
          auto R = interior_coupling(x1, C, cs_pred, ls_pred, jac);
          auto F = bulk_load(mi, x1, C, sys.f_c, {}, jac);
          N = sum(R.bulk, F.F);
          J.clear();
          if (jac) {
            const int n = sys.n_c;
            for (int k = 0; k < n * n; ++k) {
              const SparseMatrix *a = R.J.empty() ? nullptr : &R.J[k];
              const SparseMatrix *b = F.J.empty() ? nullptr : &F.J[k];
              if (a && b) J.push_back(SparseMatrix::combine(1.0, *a, 1.0, *b));
              else if (a) J.push_back(*a);
              else if (b) J.push_back(*b);
              else J.emplace_back(mi.pattern);
            }
          }
        };
        auto r = solve_bulk_cn(bi0, bi1, sys.D_c, dt, st.c, N0, react, nullptr, cfg.picard_tol,
                               cfg.picard_max_iters);
        c1 = std::move(r.C);
        rec.picard_iterations = std::max(rec.picard_iterations, r.iterations);
        rec.picard_residual = std::max(rec.picard_residual, r.residual);
      } else {
        c1 = solve_bulk_imex(bi1, sys.D_c, dt, bi0, st.c, N0, nullptr);
      }
    }

    // (8) surface correctors
    FieldSet ls1 = ls_pred, cs1 = cs_pred;
    if (cn) {
      if (sys.n_ls > 0) {
        const auto G1 = exterior_coupling(y1, l1, ls_pred, false);
        const FieldSet Fls1 = surface_kinetics_load(curve1.x, ls_pred, sys.f_ls);
        ls1 = correct(s0, s1, sys.D_ls, st.ls, G0.surf, G1.surf, Fls0, Fls1);
      }
      if (sys.n_cs > 0) {
        const auto R1 = interior_coupling(x1, c1, cs_pred, ls_pred, false);
        const FieldSet Fcs1 = surface_kinetics_load(curve1.x, cs_pred, sys.f_cs);
        cs1 = correct(s0, s1, sys.D_cs, st.cs, R0.surf, R1.surf, Fcs0, Fcs1);
        double mis = 0.0;
        for (const auto &v : R1.bulk)
          for (double a : v) mis += a;
        for (const auto &v : R1.surf)
          for (double a : v) mis -= a;
        rec.coupling_mismatch = mis;
      }
    }

    // (9) commit and diagnostics
    st.time = t1;
    st.step += 1;
    st.c = std::move(c1);
    st.cs = std::move(cs1);
    st.l = std::move(l1);
    st.ls = std::move(ls1);
    st.x_int = x1;
    st.w_int = fi.w;
    st.w_curve = fc.w;
    if (me) {
      st.x_ext = y1;
      st.w_ext = w_ext1;
    }
    st.curve = std::move(curve1);
    st.cortex = cortex1;
    Mi = Mi1;
    Ki = Ki1;
    if (me) {
      Me = Me1;
      Ke = Ke1;
    }
    if (prob.source) prob.source->update(st.curve.x);

    rec.ledger = make_ledger(s1.ops.M);
    const auto err = conservation_error(ledger_prev, rec.ledger, ledger0.grand_total);
    rec.ledger.err_abs = err.abs;
    rec.ledger.err_rel = err.rel;
    ledger_prev = rec.ledger;
    rec.telemetry = telemetry();
    rec.lambda = st.cortex.lambda;
    return rec;
  }

  MeshTelemetry telemetry() const {
    MeshTelemetry t = mesh_telemetry(mi.topo, st.x_int, st.curve);
    if (me) {
      const MeshTelemetry e = mesh_telemetry(me->topo, st.x_ext, st.curve);
      t.min_area = std::min(t.min_area, e.min_area);
      t.min_angle = std::min(t.min_angle, e.min_angle);
    }
    return t;
  }
};

Simulation::Simulation(Problem problem, const SchemeConfig &scheme, const StepperOptions &options) {
  DomainPair d = build_meshes(problem.mesh);
  impl_ = std::make_unique<Impl>(std::move(problem), std::move(d), scheme, options);
}

Simulation::Simulation(Problem problem, DomainPair meshes, const SchemeConfig &scheme,
                       const StepperOptions &options)
    : impl_(std::make_unique<Impl>(std::move(problem), std::move(meshes), scheme, options)) {}

Simulation::~Simulation() = default;
Simulation::Simulation(Simulation &&) noexcept = default;
Simulation &Simulation::operator=(Simulation &&) noexcept = default;

StepRecord Simulation::advance() { return impl_->advance(); }
const SystemState &Simulation::state() const { return impl_->st; }
const Problem &Simulation::problem() const { return impl_->prob; }
const SchemeConfig &Simulation::scheme() const { return impl_->cfg; }
const BulkMesh &Simulation::interior_mesh() const { return impl_->mi; }
const BulkMesh *Simulation::exterior_mesh() const { return impl_->me ? &*impl_->me : nullptr; }
const MassLedger &Simulation::initial_ledger() const { return impl_->ledger0; }
MeshTelemetry Simulation::telemetry() const { return impl_->telemetry(); }

MassLedger Simulation::ledger() const {
  const auto &s = impl_->st;
  return impl_->make_ledger(assemble_surface_operators(impl_->cm, s.curve.x, Field(s.curve.size(), 0.0)).M);
}

}  // namespace morphosim
