#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "morphosim/core.hpp"
#include "morphosim/sparse.hpp"

using namespace morphosim;

namespace {

// Dense Gaussian elimination with partial pivoting; independent of the sparse path.
std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    std::swap(a[k], a[p]);
    std::swap(b[k], b[p]);
    for (int i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      for (int j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

SparseMatrix random_banded(int n, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.push_back({i, i, 4.0 + u(rng)});
    if (i > 0) t.push_back({i, i - 1, u(rng)});
    if (i + 1 < n) t.push_back({i, i + 1, u(rng)});
    t.push_back({i, (i * 7 + 3) % n, 0.5 * u(rng)});
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

}  // namespace

TEST(SparseMatrix, TripletsAreSummedAndSorted) {
  auto A = SparseMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 2, 0.5}, {1, 0, -1.0}});
  EXPECT_EQ(A.nnz(), 3u);
  EXPECT_DOUBLE_EQ(A.at(1, 2), 1.5);
  EXPECT_DOUBLE_EQ(A.at(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(A.at(0, 0), 0.0);
  const auto &p = A.pattern();
  for (int i = 0; i < p.rows; ++i)
    for (int k = p.row_ptr[i] + 1; k < p.row_ptr[i + 1]; ++k) EXPECT_LT(p.col_idx[k - 1], p.col_idx[k]);
}

TEST(SparseMatrix, TripletOutOfRangeThrows) {
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), std::out_of_range);
}

TEST(SparseMatrix, MultiplyAndSums) {
  auto A = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 3.0}, {1, 1, 4.0}});
  const auto y = A.multiply({1.0, -1.0});
  EXPECT_DOUBLE_EQ(y[0], -1.0);
  EXPECT_DOUBLE_EQ(y[1], -1.0);
  EXPECT_EQ(A.column_sums(), (std::vector<double>{4.0, 6.0}));
  EXPECT_EQ(A.row_sums(), (std::vector<double>{3.0, 7.0}));
  EXPECT_DOUBLE_EQ(A.sum(), 10.0);
  EXPECT_DOUBLE_EQ(A.inf_norm(), 7.0);
  EXPECT_DOUBLE_EQ(A.max_abs(), 4.0);
}

TEST(SparseMatrix, CombineSharedAndMixedPatterns) {
  auto A = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, 2.0}});
  SparseMatrix B(A.pattern_ptr(), {3.0, 4.0});
  auto C = SparseMatrix::combine(2.0, A, -1.0, B);
  EXPECT_EQ(C.pattern_ptr(), A.pattern_ptr());
  EXPECT_DOUBLE_EQ(C.at(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(C.at(1, 1), 0.0);
  auto D = SparseMatrix::from_triplets(2, 2, {{0, 1, 5.0}});
  auto E = SparseMatrix::combine(1.0, A, 1.0, D);
  EXPECT_DOUBLE_EQ(E.at(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(E.at(1, 1), 2.0);
}

TEST(SparseMatrix, BlockAssembly) {
  auto I = SparseMatrix::identity(2);
  auto A = SparseMatrix::from_triplets(2, 2, {{0, 1, 3.0}});
  auto S = SparseMatrix::block({{&I, &A}, {nullptr, &I}});
  EXPECT_EQ(S.rows(), 4);
  EXPECT_DOUBLE_EQ(S.at(0, 3), 3.0);
  EXPECT_DOUBLE_EQ(S.at(3, 3), 1.0);
  EXPECT_DOUBLE_EQ(S.at(2, 0), 0.0);
}

TEST(SparseMatrix, DirichletEliminationKeepsPattern) {
  auto A = SparseMatrix::from_triplets(3, 3, {{0, 0, 2.0}, {0, 1, -1.0}, {1, 0, -1.0}, {1, 1, 2.0},
                                              {1, 2, -1.0}, {2, 1, -1.0}, {2, 2, 2.0}});
  const auto nnz = A.nnz();
  std::vector<double> rhs{0.0, 0.0, 0.0};
  A.eliminate_dirichlet({0, 2}, {1.0, 3.0}, rhs);
  EXPECT_EQ(A.nnz(), nnz);
  EXPECT_DOUBLE_EQ(rhs[0], 1.0);
  EXPECT_DOUBLE_EQ(rhs[1], 4.0);
  EXPECT_DOUBLE_EQ(rhs[2], 3.0);
  const auto x = solve_sparse(A, rhs);
  EXPECT_NEAR(x[1], 2.0, 1e-15);
}

TEST(LinearSolver, IdentitySystem) {
  const std::vector<double> b{1.0, -2.0, 3.5};
  EXPECT_EQ(solve_sparse(SparseMatrix::identity(3), b), b);
}

TEST(LinearSolver, MatchesDenseEliminationOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 30 + 10 * trial;
    const auto A = random_banded(n, rng);
    std::vector<double> b(n);
    for (auto &v : b) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const auto x = solve_sparse(A, b);
    const auto xd = dense_solve(A.dense(), b);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(x[i], xd[i], 1e-12 * (1.0 + std::abs(xd[i])));
  }
}

TEST(LinearSolver, RefactorizeReusesOrderingAndIsDeterministic) {
  std::mt19937_64 rng(11);
  const auto A = random_banded(50, rng);
  std::vector<double> b(50, 1.0);
  LinearSolver s;
  s.factorize(A);
  const auto x1 = s.solve(b);
  SparseMatrix A2(A.pattern_ptr(), A.values());
  for (auto &v : A2.values()) v *= 2.0;
  s.factorize(A2);
  const auto x2 = s.solve(b);
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(x2[i], 0.5 * x1[i], 1e-14 * (1.0 + std::abs(x1[i])));
  // A fresh solver on the same input gives bitwise identical output.
  LinearSolver t;
  t.factorize(A);
  EXPECT_EQ(t.solve(b), x1);
}

TEST(LinearSolver, SingularMatrixIsReported) {
  auto A = SparseMatrix::from_triplets(3, 3, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 1.0}, {1, 1, 2.0}, {2, 2, 1.0}});
  try {
    solve_sparse(A, {1.0, 1.0, 1.0});
    FAIL() << "expected a numerical error";
  } catch (const NumericalError &e) {
    EXPECT_EQ(e.stage(), "solve");
    EXPECT_NE(std::string(e.what()).find("singular"), std::string::npos);
  }
}

TEST(LinearSolver, SolveBeforeFactorizeIsLogicError) {
  LinearSolver s;
  EXPECT_THROW(s.solve({1.0}), std::logic_error);
}
