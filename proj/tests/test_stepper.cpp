#include <gtest/gtest.h>

#include <cmath>

#include "morphosim/stepper.hpp"

using namespace morphosim;

namespace {

SchemeConfig scheme_of(const Problem &p, int steps) {
  SchemeConfig s;
  s.dt = p.dt;
  s.T = steps * p.dt;
  s.bulk_scheme = p.scheme;
  return s;
}

// Stationary unit disk with one surface species and decoupled linear membrane kinetics.
Problem decoupled_surface(int n_b, int mode, double D, double a) {
  Problem p = problem_wave_pinning_stationary();
  auto &s = p.system;
  s.interior_coupling = nullptr;
  s.D_cs = {D};
  s.c_init = {[](const Vec2 &, double) { return 0.5; }};
  s.cs_init = {[mode](const Vec2 &x, double) { return std::cos(mode * std::atan2(x.y, x.x)); }};
  if (a != 0.0)
    s.f_cs = [a](const Vec2 &, const double *c, double *f, double *jac) {
      f[0] = a * c[0];
      if (jac) jac[0] = a;
    };
  p.mesh.radius = 1.0;
  p.mesh.n_boundary = n_b;
  p.dt = 0.05;
  return p;
}

// Eigenvalue of M_s^{-1} K_s on a regular polygon for Fourier mode k.
double polygon_eigenvalue(int n, int k) {
  const double h = 2.0 * std::sin(kPi / n);
  const double c = std::cos(2.0 * kPi * k / n);
  return 6.0 * (1.0 - c) / (h * h * (2.0 + c));
}

double mode_amplitude_error(const Simulation &sim, int mode, double g) {
  const auto &x = sim.state().curve.x;
  const auto &cs = sim.state().cs[0];
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    m = std::max(m, std::abs(cs[i] - g * std::cos(mode * std::atan2(x[i].y, x[i].x))));
  return m;
}

}  // namespace

TEST(SchemeConfig, Validation) {
  SchemeConfig s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.steps(), 10);
  s.dt = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s.dt = 0.5;
  s.T = 0.25;
  EXPECT_THROW(s.validate(), ConfigError);
  s.T = 1.0;
  s.picard_max_iters = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s.picard_max_iters = 5;
  s.picard_tol = -1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s.picard_tol = 1e-9;
  s.dt = 0.3;
  s.T = 0.9;
  EXPECT_EQ(s.steps(), 3);
}

TEST(Simulation, MovingDiffusionConservesAndTranslates) {
  Problem p = problem_moving_diffusion();
  p.mesh.n_boundary = 24;
  auto cfg = scheme_of(p, 20);
  cfg.conservation_check = true;
  Simulation sim(p, cfg);
  const Vec2 c0 = sim.telemetry().centroid;
  for (int k = 1; k <= 20; ++k) {
    const auto r = sim.advance();
    EXPECT_LT(std::abs(r.ledger.err_rel), 1e-12);
    EXPECT_LT(r.boundary_advection, 1e-12);
    EXPECT_NEAR(r.telemetry.centroid.x, c0.x + k * p.dt, 1e-8);
    EXPECT_NEAR(r.telemetry.centroid.y, c0.y, 1e-8);
  }
  EXPECT_EQ(sim.state().step, 20);
  EXPECT_NEAR(sim.state().time, 20 * p.dt, 1e-15);
}

TEST(Simulation, ConstantStateIsPreserved) {
  Problem p = decoupled_surface(32, 0, 0.1, 0.0);
  p.system.cs_init = {[](const Vec2 &, double) { return 1.25; }};
  Simulation sim(p, scheme_of(p, 10));
  for (int k = 0; k < 10; ++k) sim.advance();
  for (double v : sim.state().c[0]) EXPECT_NEAR(v, 0.5, 1e-13);
  for (double v : sim.state().cs[0]) EXPECT_NEAR(v, 1.25, 1e-13);
}

TEST(Simulation, SurfaceCorrectorDecayFactor) {
  const int n = 40, k = 3, steps = 6;
  const double D = 0.2, a = -0.3;
  Problem p = decoupled_surface(n, k, D, a);
  Simulation sim(p, scheme_of(p, steps));
  const double z = p.dt * D * polygon_eigenvalue(n, k);
  const double pred = (1.0 + p.dt * a) / (1.0 + z);
  const double g = (1.0 - 0.5 * z + 0.5 * p.dt * a * (1.0 + pred)) / (1.0 + 0.5 * z);
  for (int s = 1; s <= steps; ++s) {
    sim.advance();
    EXPECT_LT(mode_amplitude_error(sim, k, std::pow(g, s)), 1e-12);
  }
}

TEST(Simulation, PreviousValuePredictorVariant) {
  const int n = 40, k = 2;
  const double D = 0.2, a = -0.3;
  Problem p = decoupled_surface(n, k, D, a);
  StepperOptions opt;
  opt.predictor_uses_previous = true;
  Simulation sim(p, scheme_of(p, 3), opt);
  const double z = p.dt * D * polygon_eigenvalue(n, k);
  const double g = (1.0 - 0.5 * z + p.dt * a) / (1.0 + 0.5 * z);
  for (int s = 1; s <= 3; ++s) {
    sim.advance();
    EXPECT_LT(mode_amplitude_error(sim, k, std::pow(g, s)), 1e-12);
  }
}

TEST(Simulation, ImexSurfaceDecayFactor) {
  const int n = 40, k = 4;
  const double D = 0.2, a = -0.3;
  Problem p = decoupled_surface(n, k, D, a);
  p.scheme = BulkScheme::imex_euler;
  Simulation sim(p, scheme_of(p, 4));
  const double g = (1.0 + p.dt * a) / (1.0 + p.dt * D * polygon_eigenvalue(n, k));
  for (int s = 1; s <= 4; ++s) {
    sim.advance();
    EXPECT_LT(mode_amplitude_error(sim, k, std::pow(g, s)), 1e-12);
  }
}

TEST(Simulation, WavePinningCouplingLedger) {
  Problem p = problem_wave_pinning_stationary();
  p.mesh.n_boundary = 40;
  p.mesh.radius = 2.0;
  auto cfg = scheme_of(p, 5);
  cfg.conservation_check = true;
  Simulation sim(p, cfg);
  const double m0 = sim.initial_ledger().grand_total;
  for (int k = 0; k < 5; ++k) {
    const auto r = sim.advance();
    EXPECT_LT(std::abs(r.ledger.err_rel), 1e-13);
    EXPECT_LT(std::abs(r.coupling_mismatch), 1e-12 * m0);
    EXPECT_GE(r.picard_iterations, 1);
  }
  EXPECT_NEAR(sim.ledger().grand_total, m0, 1e-12 * m0);
}

TEST(Simulation, RejectsInconsistentSetup) {
  Problem p = problem_chemotaxis();
  p.mesh.exterior = false;
  EXPECT_THROW(Simulation(p, scheme_of(p, 1)), ConfigError);
  Problem q = problem_moving_diffusion();
  q.motion.law = CurveLaw::membrane;
  EXPECT_THROW(Simulation(q, scheme_of(q, 1)), ConfigError);
}

TEST(ConvergenceStudy, TableShapeAndSentinel) {
  SchemeConfig cfg;
  cfg.dt = 1e-3;
  cfg.T = 0.01;
  auto make = [] {
    Problem p = problem_moving_diffusion();
    p.mesh.n_boundary = 16;
    return p;
  };
  const auto t = convergence_study(make, 2, RefinementMode::split, cfg);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_TRUE(std::isnan(t.rows[0].order_L2));
  EXPECT_GT(t.rows[1].dofs, t.rows[0].dofs);
  EXPECT_LT(t.rows[1].h, t.rows[0].h);
  EXPECT_LT(t.rows[1].L2, t.rows[0].L2);
}
