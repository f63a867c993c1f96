#include <gtest/gtest.h>

#include "morphosim/verify.hpp"

using namespace morphosim;

TEST(IdentitySuite, RandomMovingMeshesPass) {
  const auto r = run_identity_suite(20, 3);
  EXPECT_EQ(r.trials, 20);
  EXPECT_LT(r.stiffness, 1e-13);
  EXPECT_LT(r.bulk_advection, 1e-13);
  EXPECT_LT(r.surface_stiffness, 1e-13);
  EXPECT_LT(r.surface_advection, 1e-13);
  EXPECT_LT(r.boundary_advection, 1e-13);
  EXPECT_LT(r.mass_partition, 1e-13);
  EXPECT_TRUE(r.passed());
}

TEST(IdentitySuite, DeterministicForSeed) {
  const auto a = run_identity_suite(5, 42), b = run_identity_suite(5, 42);
  EXPECT_EQ(a.stiffness, b.stiffness);
  EXPECT_EQ(a.boundary_advection, b.boundary_advection);
}

TEST(IdentitySuite, ThresholdIsApplied) {
  IdentityReport r;
  r.trials = 1;
  EXPECT_TRUE(r.passed());
  r.surface_advection = 1e-10;
  EXPECT_FALSE(r.passed());
  EXPECT_TRUE(r.passed(1e-9));
}
