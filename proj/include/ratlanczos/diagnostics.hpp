#pragma once

#include <cmath>
#include <vector>

#include "ratlanczos/dense.hpp"
#include "ratlanczos/rational_lanczos.hpp"
#include "ratlanczos/sparse_sym.hpp"

namespace ratlanczos {

/// ||I - Q^T Q||_2.
inline double orth_loss(const Matrix& q) {
  const Index k = q.cols();
  if (k == 0) return 0.0;
  const Matrix g = Matrix::Identity(k, k) - q.transpose() * q;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(g), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct RitzPair {
  double value = 0.0;
  double residual = 0.0;  // ||A x - lambda x|| / |lambda| with x = Q s
};

/// Largest Ritz value of J = Q^T A Q and its relative residual.
inline RitzPair largest_ritz(const SparseSym& a, const Matrix& q, const Matrix& j) {
  const SymEig e = sym_eig(j);
  const Index last = e.values.size() - 1;
  const Vector x = q * e.vectors.col(last);
  const double lam = e.values(last);
  RitzPair out;
  out.value = lam;
  out.residual = (spmv(a, x) - lam * x).norm() / std::abs(lam);
  return out;
}

/// Entries |q_1^T q_l| * |e_l^T f(J) e_1| for l >= 2. Entry l = 1 is left out
/// (set to zero) since q_1^T q_1 = 1 is not an error term.
inline Vector component_products(const Matrix& q, const Matrix& j, const ScalarFunction& f) {
  const Index k = j.rows();
  const Vector fe1 = dense_matfun(j, f).col(0);
  const Vector inner = q.leftCols(k).transpose() * q.col(0);
  Vector out = inner.cwiseAbs().cwiseProduct(fe1.cwiseAbs());
  out(0) = 0.0;
  return out;
}

struct DiagnosticsRow {
  Index iteration = 0;
  double orth_loss = 0.0;
  double ritz_value = 0.0;
  double ritz_residual = 0.0;
  double component_product = 0.0;  // max over l >= 2
  double quad_value = 0.0;         // ||v||^2 e_1^T f(J_j) e_1
};

/// Per-iteration finite-precision traces of a run with retained basis.
inline std::vector<DiagnosticsRow> diagnostics(const SparseSym& a, const LanczosResult& r,
                                               const ScalarFunction& f) {
  if (r.basis.cols() == 0) throw InvalidArgument("diagnostics: run did not retain the basis");
  std::vector<DiagnosticsRow> rows;
  for (Index j = 1; j <= r.steps; ++j) {
    const Matrix q = r.basis.leftCols(j);
    const Matrix jj = r.J.topLeftCorner(j, j);
    DiagnosticsRow row;
    row.iteration = j;
    row.orth_loss = orth_loss(q);
    const RitzPair rp = largest_ritz(a, q, jj);
    row.ritz_value = rp.value;
    row.ritz_residual = rp.residual;
    row.component_product = component_products(q, jj, f).maxCoeff();
    row.quad_value = r.v_norm * r.v_norm * dense_matfun(jj, f)(0, 0);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ratlanczos
