#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ratlanczos/errors.hpp"

namespace ratlanczos {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Triplet = Eigen::Triplet<double>;
using CsrMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Definiteness { positive, negative, indefinite, unknown };

inline const char* to_string(Definiteness d) {
  switch (d) {
    case Definiteness::positive: return "positive";
    case Definiteness::negative: return "negative";
    case Definiteness::indefinite: return "indefinite";
    default: return "unknown";
  }
}

/// Symmetric sparse matrix in compressed row storage. Symmetry (structure and
/// values) is checked on construction; the object is immutable afterwards.
class SparseSym {
 public:
  SparseSym() = default;

  explicit SparseSym(CsrMatrix m, Definiteness hint = Definiteness::unknown)
      : mat_(std::move(m)), hint_(hint) {
    if (mat_.rows() != mat_.cols()) {
      throw DimensionError("SparseSym: matrix is " + std::to_string(mat_.rows()) +
                           "x" + std::to_string(mat_.cols()));
    }
    mat_.makeCompressed();
    check_symmetry();
  }

  /// Triplets are summed when duplicated. Both triangles must be supplied.
  static SparseSym from_triplets(Index n, const std::vector<Triplet>& entries,
                                 Definiteness hint = Definiteness::unknown) {
    CsrMatrix m(n, n);
    m.setFromTriplets(entries.begin(), entries.end());
    return SparseSym(std::move(m), hint);
  }

  /// Builds from a dense matrix, dropping exact zeros.
  static SparseSym from_dense(const Matrix& a, Definiteness hint = Definiteness::unknown) {
    if (a.rows() != a.cols()) throw DimensionError("SparseSym::from_dense: not square");
    std::vector<Triplet> t;
    for (Index j = 0; j < a.cols(); ++j)
      for (Index i = 0; i < a.rows(); ++i)
        if (a(i, j) != 0.0) t.emplace_back(i, j, a(i, j));
    return from_triplets(a.rows(), t, hint);
  }

  static SparseSym diagonal(const Vector& d, Definiteness hint = Definiteness::unknown) {
    std::vector<Triplet> t;
    for (Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d(i));
    return from_triplets(d.size(), t, hint);
  }

  Index size() const { return mat_.rows(); }
  Index nnz() const { return mat_.nonZeros(); }
  Definiteness definiteness_hint() const { return hint_; }
  SparseSym with_hint(Definiteness hint) const { return SparseSym(mat_, hint); }

  const CsrMatrix& csr() const { return mat_; }
  const int* row_ptr() const { return mat_.outerIndexPtr(); }
  const int* col_idx() const { return mat_.innerIndexPtr(); }
  const double* values() const { return mat_.valuePtr(); }

  Matrix to_dense() const { return Matrix(mat_); }

  /// Max absolute row sum; an upper bound on the 2-norm for symmetric A.
  double norm_inf() const {
    double best = 0.0;
    for (Index i = 0; i < size(); ++i) {
      double s = 0.0;
      for (int k = row_ptr()[i]; k < row_ptr()[i + 1]; ++k) s += std::abs(values()[k]);
      best = std::max(best, s);
    }
    return best;
  }

 private:
  void check_symmetry() const {
    const CsrMatrix t = mat_.transpose();
    const CsrMatrix diff = mat_ - t;
    for (Index k = 0; k < diff.nonZeros(); ++k) {
      if (diff.valuePtr()[k] != 0.0) {
        throw InvalidArgument("SparseSym: matrix is not symmetric");
      }
    }
  }

  CsrMatrix mat_;
  Definiteness hint_ = Definiteness::unknown;
};

/// y = A x, accumulated row by row in ascending column order.
inline Vector spmv(const SparseSym& a, const Vector& x) {
  if (x.size() != a.size()) {
    throw DimensionError("spmv: vector has length " + std::to_string(x.size()) +
                         ", matrix has size " + std::to_string(a.size()));
  }
  Vector y(a.size());
  const int* rp = a.row_ptr();
  const int* ci = a.col_idx();
  const double* v = a.values();
  for (Index i = 0; i < a.size(); ++i) {
    double s = 0.0;
    for (int k = rp[i]; k < rp[i + 1]; ++k) s += v[k] * x(ci[k]);
    y(i) = s;
  }
  return y;
}

/// Column-wise spmv.
inline Matrix spmm(const SparseSym& a, const Matrix& x) {
  if (x.rows() != a.size()) throw DimensionError("spmm: row count mismatch");
  Matrix y(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) y.col(c) = spmv(a, x.col(c));
  return y;
}

}  // namespace ratlanczos
