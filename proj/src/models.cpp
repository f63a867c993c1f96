#include "morphosim/model.hpp"

#include <cmath>
#include <stdexcept>

namespace morphosim {

namespace {

void require_positive(double v, const char *name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
}

void require_nonnegative(double v, const char *name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be nonnegative");
}

SpaceTimeField constant_field(double v) {
  return [v](const Vec2 &, double) { return v; };
}

}  // namespace

void RDSystem::validate() const {
  if (n_l < 0 || n_ls < 0 || n_c < 0 || n_cs < 0) throw ConfigError("species counts must be nonnegative");
  auto check = [](const std::vector<double> &D, int n, const char *what) {
    if (static_cast<int>(D.size()) != n) throw ConfigError(std::string(what) + ": diffusivity count mismatch");
    for (double d : D) require_positive(d, what);
  };
  check(D_l, n_l, "D_l");
  check(D_ls, n_ls, "D_ls");
  check(D_c, n_c, "D_c");
  check(D_cs, n_cs, "D_cs");
  if (static_cast<int>(c_init.size()) != n_c || static_cast<int>(cs_init.size()) != n_cs ||
      static_cast<int>(l_init.size()) != n_l || static_cast<int>(ls_init.size()) != n_ls)
    throw ConfigError("initial condition count mismatch");
  if (n_l > 0 && outer_bc == OuterBc::dirichlet && static_cast<int>(l_dirichlet.size()) != n_l)
    throw ConfigError("outer Dirichlet values missing");
}

void WavePinningParams::validate() const {
  require_positive(R0, "R0");
  require_positive(k0, "k0");
  require_positive(gamma, "gamma");
  require_positive(K, "K");
  require_positive(delta, "delta");
  require_nonnegative(s_l, "s_l");
  require_nonnegative(s_h, "s_h");
  require_positive(sigma, "sigma");
  require_nonnegative(c0, "c0");
  require_positive(D_cs, "D_cs");
  require_positive(D_c, "D_c");
  require_positive(omega_factor, "omega_factor");
}

double activation_flux(const WavePinningParams &p, double c, double c_s) {
  const double cs2 = c_s * c_s;
  return p.omega * (p.k0 + p.gamma * cs2 / (p.K * p.K + cs2)) * c - p.delta * c_s;
}

double activation_null_bulk(const WavePinningParams &p, double c_s) {
  const double cs2 = c_s * c_s;
  return p.delta * c_s / (p.omega * (p.k0 + p.gamma * cs2 / (p.K * p.K + cs2)));
}

void LigandReceptorParams::validate() const {
  require_positive(k1, "k1");
  require_positive(k_minus1, "k_minus1");
  require_nonnegative(epsilon, "epsilon");
  require_positive(D_ls, "D_ls");
  require_positive(D_l, "D_l");
  require_positive(N_R, "N_R");
  if (!(R_tilde0 > 0.0 && R_tilde0 < 1.0)) throw ConfigError("R_tilde0 must lie in (0,1)");
  require_positive(R_outer, "R_outer");
  require_nonnegative(beta, "beta");
  require_positive(K_prot, "K_prot");
  require_positive(upsilon, "upsilon");
  require_positive(sigma_l, "sigma_l");
  require_nonnegative(source_strength, "source_strength");
  require_positive(trigger_distance, "trigger_distance");
}

double LigandReceptorParams::R_T(double R0) const {
  return N_R / (4.0 * kPi * R0 * R0) * 1e24 / avogadro;
}

double ligand_binding_flux(const LigandReceptorParams &p, double R_T, double l, double l_s) {
  return p.k_minus1 * l_s - p.k1 * (R_T - l_s) * l;
}

void StrychalskiParams::validate() const {
  require_positive(k1, "k1");
  require_positive(k2, "k2");
  require_positive(Km1, "Km1");
  require_positive(Km2, "Km2");
  require_positive(S, "S");
  require_positive(D, "D");
}

PointSourceController::PointSourceController(std::vector<Vec2> path, double trigger)
    : path_(std::move(path)), trigger_(trigger) {
  if (path_.empty()) throw ConfigError("point source path is empty");
}

bool PointSourceController::update(const std::vector<Vec2> &membrane) {
  if (index_ + 1 >= path_.size()) return false;
  for (const auto &x : membrane)
    if (norm(x - path_[index_]) < trigger_) {
      ++index_;
      return true;
    }
  return false;
}

double bessel_j1(double z) {
  const double a = std::abs(z);
  if (a < 8.0) {
    // Alternating power series; terms stay below ~30 so cancellation is mild.
    const double h = 0.5 * z, h2 = h * h;
    double term = h, sum = h;
    for (int k = 1; k < 60; ++k) {
      term *= -h2 / (static_cast<double>(k) * (k + 1));
      sum += term;
      if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum;
  }
  const double v = std::cyl_bessel_j(1.0, a);
  return z < 0 ? -v : v;
}

Problem problem_moving_diffusion() {
  Problem p;
  auto &s = p.system;
  s.name = "moving_diffusion";
  s.n_c = 1;
  s.D_c = {1.0};
  const double c0 = 1.0 / std::sinh(1.0);
  s.c_init = {[c0](const Vec2 &x, double) { return c0 * std::exp(-x.x); }};
  s.exact = [c0](const Vec2 &x, double t) { return c0 * std::exp(-(x.x - t)); };
  s.u_omega = {VelocityKind::zero, {}};
  s.u_gamma = {VelocityKind::constant, {1.0, 0.0}};
  p.mesh = {};
  p.mesh.radius = 1.0;
  p.mesh.n_boundary = 87;
  p.motion.law = CurveLaw::translate;
  p.motion.u_b = {1.0, 0.0};
  p.dt = 5e-4;
  p.T = 0.5;
  return p;
}

Problem problem_moving_advection_diffusion() {
  Problem p = problem_moving_diffusion();
  auto &s = p.system;
  s.name = "moving_advection_diffusion";
  const double D = 0.25;
  s.D_c = {D};
  auto exact = [D](const Vec2 &x, double t) {
    const Vec2 r = x - Vec2{t, 0.0};
    const double rn = norm(r);
    const double lam = kBesselLambda;
    const double j1l = bessel_j1(lam);
    if (rn < 1e-300) return j1l;
    return std::exp(-lam * lam * D * t) * (r.x / rn) * bessel_j1(lam * rn) + j1l;
  };
  s.c_init = {exact};
  s.exact = exact;
  s.u_omega = {VelocityKind::constant, {1.0, 0.0}};
  p.dt = 2e-5;
  p.T = 0.2;
  return p;
}

Problem problem_strychalski(const StrychalskiParams &sp) {
  sp.validate();
  Problem p;
  p.strychalski = std::make_shared<StrychalskiParams>(sp);
  auto prm = p.strychalski;
  auto &s = p.system;
  s.name = "strychalski";
  s.n_c = 2;
  s.D_c = {sp.D, sp.D};
  s.f_c = [prm](const Vec2 &, const double *c, double *f, double *jac) {
    const double den = prm->Km2 + c[1];
    const double v = prm->k2 * c[1] / den;
    f[0] = v;
    f[1] = -v;
    if (jac) {
      const double d = prm->k2 * prm->Km2 / (den * den);
      jac[0] = 0.0;
      jac[1] = d;
      jac[2] = 0.0;
      jac[3] = -d;
    }
  };
  // Membrane activation moves c1 into c2; D grad c . n is the inflow.
  s.interior_coupling = [prm](const Vec2 &, const double *c, const double *, const double *,
                              double *out, double *, double *jac) {
    const double den = prm->Km1 + c[0];
    const double v = prm->k1 * prm->S * c[0] / den;
    out[0] = -v;
    out[1] = v;
    if (jac) {
      const double d = prm->k1 * prm->S * prm->Km1 / (den * den);
      jac[0] = -d;
      jac[1] = 0.0;
      jac[2] = d;
      jac[3] = 0.0;
    }
  };
  s.c_init = {constant_field(1.0), constant_field(0.0)};
  s.u_omega = {VelocityKind::constant, sp.u_b};
  s.u_gamma = {VelocityKind::constant, sp.u_b};
  p.mesh.kind = MeshKind::star;
  p.dt = 1.25e-3;
  p.T = 0.4;
  p.mesh.star_h = 4.0 * p.dt;
  p.motion.law = CurveLaw::translate;
  p.motion.u_b = sp.u_b;
  p.scheme = BulkScheme::imex_euler;
  return p;
}

Problem problem_wave_pinning_stationary(const WavePinningParams &wp) {
  wp.validate();
  Problem p;
  p.wave = std::make_shared<WavePinningParams>(wp);
  auto prm = p.wave;
  auto &s = p.system;
  s.name = "wave_pinning";
  s.n_c = 1;
  s.n_cs = 1;
  s.D_c = {wp.D_c};
  s.D_cs = {wp.D_cs};
  s.interior_coupling = [prm](const Vec2 &, const double *c, const double *cs, const double *,
                              double *out, double *sout, double *jac) {
    const double a = activation_flux(*prm, c[0], cs[0]);
    out[0] = -a;
    sout[0] = -a;
    if (jac) {
      const double cs2 = cs[0] * cs[0];
      jac[0] = -prm->omega * (prm->k0 + prm->gamma * cs2 / (prm->K * prm->K + cs2));
    }
  };
  s.c_init = {constant_field(wp.c0)};
  s.cs_init = {[prm](const Vec2 &x, double) {
    const double th = std::atan2(x.y, x.x);
    return prm->s_l + (prm->s_h - prm->s_l) * std::exp(-th * th / (2.0 * prm->sigma));
  }};
  p.mesh.radius = wp.R0;
  p.mesh.n_boundary = 103;
  p.motion.law = CurveLaw::stationary;
  p.dt = 0.1;
  p.T = 6000.0;
  return p;
}

Problem problem_chemotaxis(const WavePinningParams &wp, const LigandReceptorParams &lr) {
  wp.validate();
  lr.validate();
  Problem p;
  p.wave = std::make_shared<WavePinningParams>(wp);
  p.ligand = std::make_shared<LigandReceptorParams>(lr);
  const double R0 = wp.R0;
  p.source = std::make_shared<PointSourceController>(
      std::vector<Vec2>{{15.0, 0.0}, {15.0, 15.0}, {0.0, 15.0}, {0.0, 0.0}}, lr.trigger_distance);
  auto w = p.wave;
  auto l = p.ligand;
  auto src = p.source;
  const double RT = lr.R_T(R0);
  auto &s = p.system;
  s.name = "chemotaxis";
  s.n_l = 1;
  s.n_ls = 1;
  s.n_c = 1;
  s.n_cs = 1;
  s.D_l = {lr.D_l};
  s.D_ls = {lr.D_ls};
  s.D_c = {wp.D_c};
  s.D_cs = {wp.D_cs};
  s.f_l = [l, src](const Vec2 &x, const double *, double *f, double *jac) {
    const Vec2 d = x - src->position();
    f[0] = l->source_strength * std::exp(-dot(d, d) / (2.0 * l->sigma_l));
    if (jac) jac[0] = 0.0;
  };
  s.exterior_coupling = [l, RT](const Vec2 &, const double *lb, const double *ls, const double *,
                                double *out, double *sout, double *jac) {
    const double g = ligand_binding_flux(*l, RT, lb[0], ls[0]);
    out[0] = g;
    sout[0] = g;
    if (jac) jac[0] = -l->k1 * (RT - ls[0]);
  };
  s.interior_coupling = [w, l, RT](const Vec2 &, const double *c, const double *cs,
                                   const double *ls, double *out, double *sout, double *jac) {
    const double a = activation_flux(*w, c[0], cs[0]) + l->epsilon * ls[0] / RT * c[0];
    out[0] = -a;
    sout[0] = -a;
    if (jac) {
      const double cs2 = cs[0] * cs[0];
      jac[0] = -(w->omega * (w->k0 + w->gamma * cs2 / (w->K * w->K + cs2)) + l->epsilon * ls[0] / RT);
    }
  };
  s.c_init = {constant_field(wp.c0)};
  s.cs_init = {constant_field(wp.s_l)};
  s.l_init = {constant_field(lr.l0())};
  s.ls_init = {constant_field(lr.ls0(R0))};
  s.outer_bc = OuterBc::dirichlet;
  s.l_dirichlet = {lr.l0()};
  s.u_xi = {VelocityKind::zero, {}};
  s.u_omega = {VelocityKind::zero, {}};
  s.u_gamma = {VelocityKind::membrane_law, {}};
  p.mesh.radius = R0;
  p.mesh.n_boundary = 101;
  p.mesh.width_factor = 0.95;
  p.mesh.exterior = true;
  p.mesh.outer_radius = lr.R_outer;
  p.mesh.n_outer = 68;
  p.motion.law = CurveLaw::membrane;
  p.motion.cortex = true;
  p.motion.K_prot = lr.K_prot;
  p.motion.upsilon = lr.upsilon;
  p.motion.beta_relax = lr.beta;
  p.dt = 0.1;
  p.T = 24000.0;
  return p;
}

const std::vector<std::string> &problem_names() {
  static const std::vector<std::string> names = {"moving_diffusion", "moving_advection_diffusion",
                                                 "strychalski", "wave_pinning", "chemotaxis"};
  return names;
}

Problem make_problem(const std::string &name) {
  if (name == "moving_diffusion") return problem_moving_diffusion();
  if (name == "moving_advection_diffusion") return problem_moving_advection_diffusion();
  if (name == "strychalski") return problem_strychalski();
  if (name == "wave_pinning") return problem_wave_pinning_stationary();
  if (name == "chemotaxis") return problem_chemotaxis();
  throw ConfigError("unknown problem '" + name + "'");
}

void bind_geometry(Problem &p, double area, double perimeter) {
  if (p.wave) p.wave->omega = p.wave->omega_factor * area / perimeter;
}

}  // namespace morphosim
