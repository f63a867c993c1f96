#pragma once

#include <memory>
#include <vector>

namespace morphosim {

struct Triplet {
  int row;
  int col;
  double value;
};

// Compressed row structure shared by every operator assembled on one mesh.
struct SparsityPattern {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;
  std::vector<int> col_idx;

  int find(int row, int col) const;  // slot index or -1
};

class SparseMatrix {
 public:
  SparseMatrix() = default;
  explicit SparseMatrix(std::shared_ptr<const SparsityPattern> pattern);
  SparseMatrix(std::shared_ptr<const SparsityPattern> pattern,
               std::vector<double> values);

  // Duplicates are summed; columns end up sorted and unique per row.
  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> t);
  static SparseMatrix identity(int n);

  int rows() const { return pattern_ ? pattern_->rows : 0; }
  int cols() const { return pattern_ ? pattern_->cols : 0; }
  std::size_t nnz() const { return values_.size(); }
  const SparsityPattern &pattern() const { return *pattern_; }
  const std::shared_ptr<const SparsityPattern> &pattern_ptr() const { return pattern_; }
  const std::vector<double> &values() const { return values_; }
  std::vector<double> &values() { return values_; }

  double at(int row, int col) const;
  std::vector<double> multiply(const std::vector<double> &x) const;
  // e^T A; the column sums.
  std::vector<double> column_sums() const;
  std::vector<double> row_sums() const;
  double max_abs() const;
  double inf_norm() const;
  double sum() const;
  std::vector<std::vector<double>> dense() const;

  // alpha*A + beta*B; fast path when both share a pattern.
  static SparseMatrix combine(double alpha, const SparseMatrix &a, double beta,
                              const SparseMatrix &b);
  // Builds one square block matrix; null blocks are zero.
  static SparseMatrix block(const std::vector<std::vector<const SparseMatrix *>> &blocks);

  // Replaces the listed rows and columns by identity rows; the eliminated
  // column contributions of `values` are moved into rhs.
  void eliminate_dirichlet(const std::vector<int> &nodes,
                           const std::vector<double> &values,
                           std::vector<double> &rhs);

 private:
  std::shared_ptr<const SparsityPattern> pattern_;
  std::vector<double> values_;
};

// Sparse LU with the column ordering cached per pattern.
class LinearSolver {
 public:
  LinearSolver();
  ~LinearSolver();
  LinearSolver(LinearSolver &&) noexcept;
  LinearSolver &operator=(LinearSolver &&) noexcept;

  void factorize(const SparseMatrix &a);
  std::vector<double> solve(const std::vector<double> &b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<double> solve_sparse(const SparseMatrix &a, const std::vector<double> &b);

}  // namespace morphosim
