#include "morphosim/sparse.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <regex>

#include "morphosim/core.hpp"

namespace morphosim {

int SparsityPattern::find(int row, int col) const {
  auto first = col_idx.begin() + row_ptr[row];
  auto last = col_idx.begin() + row_ptr[row + 1];
  auto it = std::lower_bound(first, last, col);
  if (it == last || *it != col) return -1;
  return static_cast<int>(it - col_idx.begin());
}

SparseMatrix::SparseMatrix(std::shared_ptr<const SparsityPattern> pattern)
    : pattern_(std::move(pattern)), values_(pattern_->col_idx.size(), 0.0) {}

SparseMatrix::SparseMatrix(std::shared_ptr<const SparsityPattern> pattern,
                           std::vector<double> values)
    : pattern_(std::move(pattern)), values_(std::move(values)) {
  if (values_.size() != pattern_->col_idx.size())
    throw std::invalid_argument("SparseMatrix: value count does not match pattern");
}

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<Triplet> t) {
  std::stable_sort(t.begin(), t.end(), [](const Triplet &a, const Triplet &b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  auto p = std::make_shared<SparsityPattern>();
  p->rows = rows;
  p->cols = cols;
  p->row_ptr.assign(rows + 1, 0);
  std::vector<double> vals;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto &e = t[k];
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
      throw std::out_of_range("SparseMatrix: triplet index out of range");
    if (k > 0 && t[k - 1].row == e.row && t[k - 1].col == e.col) {
      vals.back() += e.value;
      continue;
    }
    p->col_idx.push_back(e.col);
    vals.push_back(e.value);
    p->row_ptr[e.row + 1]++;
  }
  std::partial_sum(p->row_ptr.begin(), p->row_ptr.end(), p->row_ptr.begin());
  return SparseMatrix(std::move(p), std::move(vals));
}

SparseMatrix SparseMatrix::identity(int n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (int i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

double SparseMatrix::at(int row, int col) const {
  int k = pattern_->find(row, col);
  return k < 0 ? 0.0 : values_[k];
}

std::vector<double> SparseMatrix::multiply(const std::vector<double> &x) const {
  const auto &p = *pattern_;
  if (static_cast<int>(x.size()) != p.cols)
    throw std::invalid_argument("SparseMatrix::multiply: dimension mismatch");
  std::vector<double> y(p.rows, 0.0);
  for (int i = 0; i < p.rows; ++i) {
    double s = 0.0;
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) s += values_[k] * x[p.col_idx[k]];
    y[i] = s;
  }
  return y;
}

std::vector<double> SparseMatrix::column_sums() const {
  const auto &p = *pattern_;
  std::vector<double> s(p.cols, 0.0);
  for (int i = 0; i < p.rows; ++i)
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) s[p.col_idx[k]] += values_[k];
  return s;
}

std::vector<double> SparseMatrix::row_sums() const {
  const auto &p = *pattern_;
  std::vector<double> s(p.rows, 0.0);
  for (int i = 0; i < p.rows; ++i)
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) s[i] += values_[k];
  return s;
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double SparseMatrix::inf_norm() const {
  const auto &p = *pattern_;
  double m = 0.0;
  for (int i = 0; i < p.rows; ++i) {
    double s = 0.0;
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) s += std::abs(values_[k]);
    m = std::max(m, s);
  }
  return m;
}

double SparseMatrix::sum() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s;
}

std::vector<std::vector<double>> SparseMatrix::dense() const {
  const auto &p = *pattern_;
  std::vector<std::vector<double>> d(p.rows, std::vector<double>(p.cols, 0.0));
  for (int i = 0; i < p.rows; ++i)
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) d[i][p.col_idx[k]] = values_[k];
  return d;
}

SparseMatrix SparseMatrix::combine(double alpha, const SparseMatrix &a, double beta,
                                   const SparseMatrix &b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("SparseMatrix::combine: dimension mismatch");
  if (a.pattern_ == b.pattern_) {
    std::vector<double> v(a.values_.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = alpha * a.values_[k] + beta * b.values_[k];
    return SparseMatrix(a.pattern_, std::move(v));
  }
  std::vector<Triplet> t;
  t.reserve(a.nnz() + b.nnz());
  for (const auto *m : {&a, &b}) {
    double s = (m == &a) ? alpha : beta;
    const auto &p = *m->pattern_;
    for (int i = 0; i < p.rows; ++i)
      for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k)
        t.push_back({i, p.col_idx[k], s * m->values_[k]});
  }
  return from_triplets(a.rows(), a.cols(), std::move(t));
}

SparseMatrix SparseMatrix::block(const std::vector<std::vector<const SparseMatrix *>> &blocks) {
  const int nb = static_cast<int>(blocks.size());
  std::vector<int> sizes(nb, -1);
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j)
      if (blocks[i][j]) {
        if (sizes[i] < 0) sizes[i] = blocks[i][j]->rows();
        if (sizes[j] < 0) sizes[j] = blocks[i][j]->cols();
      }
  std::vector<int> offset(nb + 1, 0);
  for (int i = 0; i < nb; ++i) {
    if (sizes[i] < 0) throw std::invalid_argument("SparseMatrix::block: empty block row");
    offset[i + 1] = offset[i] + sizes[i];
  }
  std::vector<Triplet> t;
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j) {
      const SparseMatrix *m = blocks[i][j];
      if (!m) continue;
      const auto &p = *m->pattern_;
      for (int r = 0; r < p.rows; ++r)
        for (int k = p.row_ptr[r]; k < p.row_ptr[r + 1]; ++k)
          t.push_back({offset[i] + r, offset[j] + p.col_idx[k], m->values_[k]});
    }
  return from_triplets(offset[nb], offset[nb], std::move(t));
}

void SparseMatrix::eliminate_dirichlet(const std::vector<int> &nodes,
                                       const std::vector<double> &values,
                                       std::vector<double> &rhs) {
  const auto &p = *pattern_;
  std::vector<char> fixed(p.rows, 0);
  std::vector<double> g(p.cols, 0.0);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    fixed[nodes[k]] = 1;
    g[nodes[k]] = values[k];
  }
  for (int i = 0; i < p.rows; ++i) {
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) {
      int j = p.col_idx[k];
      if (fixed[i]) {
        values_[k] = (i == j) ? 1.0 : 0.0;
      } else if (fixed[j]) {
        rhs[i] -= values_[k] * g[j];
        values_[k] = 0.0;
      }
    }
    if (fixed[i]) {
      if (p.find(i, i) < 0) throw std::invalid_argument("eliminate_dirichlet: missing diagonal");
      rhs[i] = g[i];
    }
  }
}

namespace {

// COLAMD keyed by the sparsity structure. Every time step rebuilds its
// operators on the same connectivity, so the ordering is computed once per
// structure instead of once per factorization.
class CachedColamdOrdering {
 public:
  using PermutationType = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

  template <typename MatrixType>
  void operator()(const MatrixType &mat, PermutationType &perm) {
    const int n = static_cast<int>(mat.cols());
    const int nnz = static_cast<int>(mat.nonZeros());
    std::vector<int> outer(mat.outerIndexPtr(), mat.outerIndexPtr() + n + 1);
    std::vector<int> inner(mat.innerIndexPtr(), mat.innerIndexPtr() + nnz);
    auto &cache = entries();
    for (const auto &e : cache)
      if (e.rows == mat.rows() && e.outer == outer && e.inner == inner) {
        perm = e.perm;
        return;
      }
    Eigen::COLAMDOrdering<int>()(mat, perm);
    if (cache.size() >= kCapacity) cache.pop_front();
    cache.push_back({static_cast<int>(mat.rows()), std::move(outer), std::move(inner), perm});
  }

 private:
  struct Entry {
    int rows;
    std::vector<int> outer, inner;
    PermutationType perm;
  };
  static constexpr std::size_t kCapacity = 16;
  static std::deque<Entry> &entries() {
    thread_local std::deque<Entry> cache;
    return cache;
  }
};

}  // namespace

struct LinearSolver::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, CachedColamdOrdering> lu;
  std::shared_ptr<const SparsityPattern> analyzed;
  Eigen::SparseMatrix<double> a;
  double a_norm = 0.0;
  bool ready = false;
};

LinearSolver::LinearSolver() : impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver &&) noexcept = default;
LinearSolver &LinearSolver::operator=(LinearSolver &&) noexcept = default;

void LinearSolver::factorize(const SparseMatrix &m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("LinearSolver: matrix not square");
  const auto &p = m.pattern();
  Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>> view(
      p.rows, p.cols, static_cast<Eigen::Index>(m.nnz()), p.row_ptr.data(), p.col_idx.data(),
      m.values().data());
  impl_->a = view;
  impl_->a.makeCompressed();
  impl_->a_norm = m.inf_norm();
  if (impl_->analyzed != m.pattern_ptr()) {
    impl_->lu.analyzePattern(impl_->a);
    impl_->analyzed = m.pattern_ptr();
  }
  impl_->lu.factorize(impl_->a);
  impl_->ready = false;
  if (impl_->lu.info() != Eigen::Success) {
    impl_->analyzed.reset();
    std::string msg = impl_->lu.lastErrorMessage();
    std::smatch match;
    std::string where;
    if (std::regex_search(msg, match, std::regex("(\\d+)\\s*$")))
      where = " (pivot failure at row " + match[1].str() + ")";
    throw NumericalError("solve", "singular matrix" + where + ": " + msg);
  }
  impl_->ready = true;
}

std::vector<double> LinearSolver::solve(const std::vector<double> &b) const {
  if (!impl_->ready) throw std::logic_error("LinearSolver::solve before factorize");
  Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
  Eigen::VectorXd x = impl_->lu.solve(rhs);
  if (impl_->lu.info() != Eigen::Success || !x.allFinite())
    throw NumericalError("solve", "back substitution failed");
  Eigen::VectorXd r = impl_->a * x - rhs;
  double tol = 1e-10 * (impl_->a_norm * x.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>());
  if (r.lpNorm<Eigen::Infinity>() > tol)
    throw NumericalError("solve", "ill-conditioned matrix: residual " +
                                      std::to_string(r.lpNorm<Eigen::Infinity>()));
  return std::vector<double>(x.data(), x.data() + x.size());
}

std::vector<double> solve_sparse(const SparseMatrix &a, const std::vector<double> &b) {
  LinearSolver s;
  s.factorize(a);
  return s.solve(b);
}

}  // namespace morphosim
