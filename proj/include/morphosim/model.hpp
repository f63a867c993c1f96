#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "morphosim/curve.hpp"
#include "morphosim/fem.hpp"

namespace morphosim {

enum class VelocityKind { zero, constant, equals_ale, membrane_law };

struct VelocitySpec {
  VelocityKind kind = VelocityKind::zero;
  Vec2 value{};
};

enum class OuterBc { none, dirichlet, zero_flux };

// Scalar field of position and time; used for initial data and exact solutions.
using SpaceTimeField = std::function<double(const Vec2 &x, double t)>;

// Bulk-surface system: interior bulk c, membrane c_s, exterior bulk l and
// membrane l_s. Bulk equations read d/dt(M C) + (B - A + K) C = R + F and
// membrane equations d/dt(M_s C_s) + (K_s - B_s) C_s = F_s - R_s.
struct RDSystem {
  std::string name;
  int n_l = 0, n_ls = 0, n_c = 0, n_cs = 0;
  std::vector<double> D_l, D_ls, D_c, D_cs;

  PointKinetics f_c, f_cs, f_l, f_ls;  // unset means zero
  // Interior coupling: bulk c, surface c_s, extra l_s -> R (into the bulk), R_s.
  CouplingKinetics interior_coupling;
  // Exterior coupling: bulk l, surface l_s -> G (into the exterior), G_s.
  CouplingKinetics exterior_coupling;
  // Declares that sum_p R = sum_q R_s and sum f = 0 pointwise.
  bool conservative_interior = true;

  VelocitySpec u_omega, u_xi, u_gamma;
  OuterBc outer_bc = OuterBc::none;
  std::vector<double> l_dirichlet;

  std::vector<SpaceTimeField> c_init, cs_init, l_init, ls_init;
  SpaceTimeField exact;  // exact c^(1), if known

  void validate() const;
};

struct WavePinningParams {
  double R0 = 5.0, k0 = 0.067, gamma = 1.0, K = 1.0, delta = 1.0;
  double s_l = 0.2805, s_h = 1.5491, sigma = 0.005, c0 = 0.4009;
  double D_cs = 0.01, D_c = 10.0;
  // omega = omega_factor * |Omega_h(0)| / |Gamma_h(0)|, set from the mesh.
  double omega_factor = 2.0;
  double omega = 0.0;

  void validate() const;
};

// Net activation rate omega (k0 + gamma c_s^2/(K^2+c_s^2)) c - delta c_s.
double activation_flux(const WavePinningParams &p, double c, double c_s);
// Bulk value at which the activation flux vanishes for a given c_s.
double activation_null_bulk(const WavePinningParams &p, double c_s);

struct LigandReceptorParams {
  double k1 = 1.0 / 30.0, k_minus1 = 1.0, epsilon = 1.0;
  double D_ls = 0.01, D_l = 10.0;
  double N_R = 75000.0, R_tilde0 = 0.15, R_outer = 50.0;
  double beta = 0.02, K_prot = 1e-5, upsilon = 1.0, sigma_l = 0.5;
  double source_strength = 10.0;
  double trigger_distance = 5.0;
  double avogadro = 6.022e23;

  void validate() const;
  double K_d() const { return k_minus1 / k1; }
  double R_T(double R0) const;
  double l0() const { return K_d() * R_tilde0 / (1.0 - R_tilde0); }
  double ls0(double R0) const { return R_T(R0) * l0() / (K_d() + l0()); }
};

double ligand_binding_flux(const LigandReceptorParams &p, double R_T, double l, double l_s);

struct StrychalskiParams {
  double k1 = 1.0, k2 = 1.0, Km1 = 0.2, Km2 = 0.2, S = 1.0, D = 0.1;
  Vec2 u_b{0.1, 0.1};

  void validate() const;
};

// Gaussian source that jumps along a square path when the cell gets close.
class PointSourceController {
 public:
  PointSourceController(std::vector<Vec2> path, double trigger_distance);
  const Vec2 &position() const { return path_[index_]; }
  int index() const { return index_; }
  // Advances to the next corner when any membrane node is within the trigger distance.
  bool update(const std::vector<Vec2> &membrane);

 private:
  std::vector<Vec2> path_;
  std::size_t index_ = 0;
  double trigger_;
};

double bessel_j1(double z);
constexpr double kBesselLambda = 1.841183781340659;

enum class BulkScheme { crank_nicolson, imex_euler };
enum class CurveLaw { stationary, translate, membrane };
enum class MeshKind { disk, star };

struct MeshSpec {
  MeshKind kind = MeshKind::disk;
  double radius = 1.0;
  int n_boundary = 87;
  double width_factor = 0.97;  // interior size relative to the boundary spacing
  double star_h = 0.005;
  bool exterior = false;
  double outer_radius = 50.0;
  int n_outer = 68;
  double grading = 0.0;  // 0: from the outer node count
  int refine_levels = 0; // uniform splits after generation
};

struct MotionSpec {
  CurveLaw law = CurveLaw::stationary;
  Vec2 u_b{};
  double curve_tau = 0.0;  // 0: 1/L0^2
  double mmpde_tau = 0.0;  // 0: 0.1/diam^2
  bool cortex = false;
  double K_prot = 0.0;
  double upsilon = 1.0;
  double beta_relax = 0.0;
  // Extra tangential speed A sin(2 pi f t + 2 pi i/N) on top of the law.
  double extra_tangential_amplitude = 0.0;
  double extra_tangential_frequency = 0.0;
};

struct Problem {
  RDSystem system;
  MeshSpec mesh;
  MotionSpec motion;
  double dt = 0.1;
  double T = 1.0;
  BulkScheme scheme = BulkScheme::crank_nicolson;
  std::shared_ptr<WavePinningParams> wave;
  std::shared_ptr<LigandReceptorParams> ligand;
  std::shared_ptr<StrychalskiParams> strychalski;
  std::shared_ptr<PointSourceController> source;
};

Problem problem_moving_diffusion();
Problem problem_moving_advection_diffusion();
Problem problem_strychalski(const StrychalskiParams &p = {});
Problem problem_wave_pinning_stationary(const WavePinningParams &p = {});
Problem problem_chemotaxis(const WavePinningParams &wp = {}, const LigandReceptorParams &lr = {});
Problem make_problem(const std::string &name);
const std::vector<std::string> &problem_names();

// Fills geometry-dependent parameters (omega, R_T) from the initial mesh.
void bind_geometry(Problem &p, double area, double perimeter);

}  // namespace morphosim
