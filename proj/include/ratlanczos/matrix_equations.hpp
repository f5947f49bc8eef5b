#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

#include "ratlanczos/dense.hpp"

namespace ratlanczos {

/// Real parts above -stability_threshold are indistinguishable from zero at
/// the rounding level of an eigendecomposition of an n x n matrix with
/// spectral radius `scale`.
inline double stability_threshold(Index n, double scale) {
  return 10.0 * static_cast<double>(n) * kEps * scale;
}

/// Solves J Y + Y J + W = 0 for symmetric stable J through J = V L V^T.
inline Matrix lyap_sym(const Matrix& j, const Matrix& w) {
  require_square(j, "lyap_sym");
  if (w.rows() != j.rows() || w.cols() != j.cols()) throw DimensionError("lyap_sym: W size");
  const Index n = j.rows();
  if (n == 0) return Matrix();
  const SymEig e = sym_eig(symmetrized(j));
  const double scale = e.values.cwiseAbs().maxCoeff();
  if (e.values.maxCoeff() >= -stability_threshold(j.rows(), scale)) {
    throw InstabilityError("lyap_sym: J has eigenvalue " + std::to_string(e.values.maxCoeff()) +
                           " which is not safely negative");
  }
  Matrix wt = e.vectors.transpose() * w * e.vectors;
  for (Index c = 0; c < n; ++c)
    for (Index r = 0; r < n; ++r) wt(r, c) = -wt(r, c) / (e.values(r) + e.values(c));
  return symmetrized(e.vectors * wt * e.vectors.transpose());
}

/// Solves M^T X + X M + G = 0 for a general stable M (Bartels-Stewart on the
/// complex Schur form M = U T U^*).
inline Matrix lyap_general(const Matrix& m, const Matrix& g) {
  require_square(m, "lyap_general");
  if (g.rows() != m.rows() || g.cols() != m.cols()) throw DimensionError("lyap_general: G size");
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  const Index n = m.rows();
  if (n == 0) return Matrix();
  Eigen::ComplexSchur<Matrix> schur(m);
  if (schur.info() != Eigen::Success) throw ConvergenceError("lyap_general: Schur failed");
  const CMatrix& u = schur.matrixU();
  const CMatrix& t = schur.matrixT();
  for (Index i = 0; i < n; ++i) {
    if (!(t(i, i).real() < 0.0)) {
      throw InstabilityError("lyap_general: eigenvalue with real part " + std::to_string(t(i, i).real()) +
                             " is not negative");
    }
  }
  // T^* X + X T = -G~ with T upper triangular: one lower-triangular solve per column.
  const CMatrix gt = u.adjoint() * g.cast<Complex>() * u;
  const CMatrix ta = t.adjoint();
  CMatrix x = CMatrix::Zero(n, n);
  for (Index k = 0; k < n; ++k) {
    Eigen::VectorXcd rhs = -gt.col(k);
    for (Index l = 0; l < k; ++l) rhs -= x.col(l) * t(l, k);
    CMatrix lhs = ta;
    lhs.diagonal().array() += t(k, k);
    x.col(k) = lhs.triangularView<Eigen::Lower>().solve(rhs);
  }
  Matrix out = (u * x * u.adjoint()).real();
  if ((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0) out = symmetrized(out);
  return out;
}

inline Matrix riccati_residual(const Matrix& j, const Matrix& gain, const Matrix& w,
                               const Matrix& y) {
  return j.transpose() * y + y * j - y * gain * y + w;
}

struct CareOptions {
  int max_iterations = 200;
  double rel_tol = 1e-11;
};

namespace detail {

inline bool is_stable(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success) return false;
  return (es.eigenvalues().real().array() < 0.0).all();
}

/// Stabilizing CARE solution from the matrix sign function of the Hamiltonian
/// [[J, -G], [-W, -J^T]], after rescaling Y so that G and W have equal norm.
inline std::optional<Matrix> care_sign_start(const Matrix& j, const Matrix& gain, const Matrix& w) {
  const Index n = j.rows();
  const double gnorm = gain.norm();
  if (gnorm == 0.0) return std::nullopt;
  const double alpha = std::sqrt(w.norm() / gnorm);
  Matrix z(2 * n, 2 * n);
  z << j, -alpha * gain, -w / alpha, -j.transpose();
  const double size = static_cast<double>(2 * n);
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Matrix> lu(z);
    const Vector piv = lu.matrixLU().diagonal().cwiseAbs();
    if (!(piv.minCoeff() > 0.0)) return std::nullopt;
    const double c = std::exp(piv.array().log().sum() / size);
    const Matrix next = 0.5 * (z / c + c * lu.inverse());
    const double change = (next - z).cwiseAbs().colwise().sum().maxCoeff();
    z = next;
    if (!std::isfinite(change)) return std::nullopt;
    if (change <= 1e-13 * z.cwiseAbs().colwise().sum().maxCoeff()) break;
  }
  Matrix lhs(2 * n, n), rhs(2 * n, n);
  lhs << z.topRightCorner(n, n), z.bottomRightCorner(n, n) + Matrix::Identity(n, n);
  rhs << -(z.topLeftCorner(n, n) + Matrix::Identity(n, n)), -z.bottomLeftCorner(n, n);
  Matrix y = alpha * symmetrized(lhs.colPivHouseholderQr().solve(rhs));
  if (!y.allFinite() || !is_stable(j - gain * y)) return std::nullopt;
  return y;
}

}  // namespace detail

/// Stabilizing solution of J^T Y + Y J - Y B Rinv B^T Y + W = 0 by
/// Newton-Kleinman, started from the sign-function solution when that is
/// stabilizing and from Y = 0 (admissible for stable J) otherwise.
inline Matrix care_newton(const Matrix& j, const Matrix& b, const Matrix& rinv, const Matrix& w,
                          const CareOptions& opts = {}) {
  require_square(j, "care_newton");
  const Index n = j.rows();
  if (b.rows() != n || rinv.rows() != b.cols() || rinv.cols() != b.cols() || w.rows() != n ||
      w.cols() != n) {
    throw DimensionError("care_newton: inconsistent dimensions");
  }
  const double wnorm = w.norm();
  Matrix y = Matrix::Zero(n, n);
  if (n == 0 || wnorm == 0.0) return y;
  const Matrix gain = b * rinv * b.transpose();
  if (std::optional<Matrix> start = detail::care_sign_start(j, gain, w)) y = *start;
  double best = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Matrix closed = j - gain * y;
    Matrix next;
    try {
      next = lyap_general(closed, w + y * gain * y);
    } catch (const InstabilityError&) {
      throw InstabilityError("care_newton: closed loop lost stability at Newton step " +
                             std::to_string(it));
    }
    y = symmetrized(next);
    const double res = riccati_residual(j, gain, w, y).norm();
    const double scale = 2.0 * j.norm() * y.norm() + (y * gain * y).norm() + wnorm;
    if (res <= opts.rel_tol * scale) {
      const Matrix polished = symmetrized(lyap_general(j - gain * y, w + y * gain * y));
      return riccati_residual(j, gain, w, polished).norm() <= res ? polished : y;
    }
    // Newton is monotone from a stabilizing start; stalled progress means
    // rounding has taken over.
    if (res < 0.5 * best) {
      stagnant = 0;
    } else if (++stagnant >= 5) {
      break;
    }
    best = std::min(best, res);
  }
  throw ConvergenceError("care_newton: Newton stagnated, residual " +
                         std::to_string(riccati_residual(j, gain, w, y).norm()) +
                         " vs ||W|| = " + std::to_string(wnorm));
}

}  // namespace ratlanczos
