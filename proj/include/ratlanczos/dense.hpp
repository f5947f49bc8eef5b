#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "ratlanczos/errors.hpp"
#include "ratlanczos/sparse_sym.hpp"

namespace ratlanczos {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

inline Matrix symmetrized(const Matrix& s) { return 0.5 * (s + s.transpose()); }

inline void require_square(const Matrix& m, const char* who) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(who) + ": matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

struct SymEig {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns
};

inline SymEig sym_eig(const Matrix& s) {
  require_square(s, "sym_eig");
  if (s.size() == 0) return {Vector(), Matrix()};
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("sym_eig: QR iteration did not converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

/// A scalar function together with its domain, evaluated on spectra.
struct ScalarFunction {
  std::string name;
  std::function<double(double)> eval;
  std::function<bool(double)> in_domain = [](double) { return true; };

  double operator()(double x) const { return eval(x); }

  static ScalarFunction identity() { return {"identity", [](double x) { return x; }}; }
  static ScalarFunction exp() { return {"exp", [](double x) { return std::exp(x); }}; }
  static ScalarFunction exp_scaled(double tau) {
    return {"exp", [tau](double x) { return std::exp(tau * x); }};
  }
  static ScalarFunction log() {
    return {"log", [](double x) { return std::log(x); }, [](double x) { return x > 0.0; }};
  }
  static ScalarFunction sqrt() {
    return {"sqrt", [](double x) { return std::sqrt(x); }, [](double x) { return x >= 0.0; }};
  }
  static ScalarFunction inv() {
    return {"inv", [](double x) { return 1.0 / x; }, [](double x) { return x != 0.0; }};
  }

  static ScalarFunction by_name(const std::string& name) {
    if (name == "exp") return exp();
    if (name == "log") return log();
    if (name == "sqrt") return sqrt();
    if (name == "inv") return inv();
    if (name == "identity" || name == "id") return identity();
    throw InvalidArgument("unknown function '" + name + "'");
  }
};

/// f(S) = V f(Lambda) V^T for symmetric S.
inline Matrix dense_matfun(const Matrix& s, const ScalarFunction& f) {
  const SymEig e = sym_eig(s);
  Vector fl(e.values.size());
  for (Index i = 0; i < e.values.size(); ++i) {
    const double lam = e.values(i);
    if (!f.in_domain(lam)) {
      throw DomainError(f.name + " is undefined at eigenvalue " + std::to_string(lam), lam);
    }
    fl(i) = f(lam);
  }
  return symmetrized(e.vectors * fl.asDiagonal() * e.vectors.transpose());
}

namespace detail {

// Diagonal Pade coefficients and their 1-norm thresholds (Higham, 2005).
inline constexpr std::array<double, 4> kPade3 = {120., 60., 12., 1.};
inline constexpr std::array<double, 6> kPade5 = {30240., 15120., 3360., 420., 30., 1.};
inline constexpr std::array<double, 8> kPade7 = {17297280., 8648640., 1995840., 277200.,
                                                 25200.,    1512.,    56.,      1.};
inline constexpr std::array<double, 10> kPade9 = {17643225600., 8821612800., 2075673600.,
                                                  302702400.,   30270240.,   2162160.,
                                                  110880.,      3960.,       90.,
                                                  1.};
inline constexpr std::array<double, 14> kPade13 = {
    64764752532480000., 32382376266240000., 7771770303897600., 1187353796428800.,
    129060195264000.,   10559470521600.,    670442572800.,     33522128640.,
    1323241920.,        40840800.,          960960.,           16380.,
    182.,               1.};
inline constexpr std::array<double, 5> kTheta = {1.495585217958292e-2, 2.539398330063230e-1,
                                                 9.504178996162932e-1, 2.097847961257068e0,
                                                 5.371920351148152e0};

template <std::size_t N>
void pade_low(const Matrix& m, const std::array<double, N>& b, Matrix& u, Matrix& v) {
  const Index n = m.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix m2 = m * m;
  Matrix power = id;
  Matrix uu = b[1] * id;
  v = b[0] * id;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * m2;
    v += b[k] * power;
    if (k + 1 < N) uu += b[k + 1] * power;
  }
  u = m * uu;
}

inline void pade13(const Matrix& m, Matrix& u, Matrix& v) {
  const auto& b = kPade13;
  const Index n = m.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix m2 = m * m;
  const Matrix m4 = m2 * m2;
  const Matrix m6 = m4 * m2;
  const Matrix ut = m6 * (b[13] * m6 + b[11] * m4 + b[9] * m2) + b[7] * m6 + b[5] * m4 +
                    b[3] * m2 + b[1] * id;
  u = m * ut;
  v = m6 * (b[12] * m6 + b[10] * m4 + b[8] * m2) + b[6] * m6 + b[4] * m4 + b[2] * m2 +
      b[0] * id;
}

}  // namespace detail

/// General (nonsymmetric) matrix exponential by scaling and squaring with a
/// diagonal Pade approximant.
inline Matrix expm_general(const Matrix& m) {
  require_square(m, "expm_general");
  const Index n = m.rows();
  if (n == 0) return Matrix();
  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw OverflowError("expm_general: non-finite input", norm1);
  if (norm1 == 0.0) return Matrix::Identity(n, n);

  Matrix u, v;
  int squarings = 0;
  if (norm1 <= detail::kTheta[0]) {
    detail::pade_low(m, detail::kPade3, u, v);
  } else if (norm1 <= detail::kTheta[1]) {
    detail::pade_low(m, detail::kPade5, u, v);
  } else if (norm1 <= detail::kTheta[2]) {
    detail::pade_low(m, detail::kPade7, u, v);
  } else if (norm1 <= detail::kTheta[3]) {
    detail::pade_low(m, detail::kPade9, u, v);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / detail::kTheta[4]))));
    detail::pade13(std::ldexp(1.0, -squarings) * m, u, v);
  }
  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  if (!r.allFinite()) {
    throw OverflowError("expm_general: overflow, ||M||_1 = " + std::to_string(norm1), norm1);
  }
  return r;
}

struct ThinQr {
  Matrix q;  // n x p, orthonormal columns
  Matrix r;  // p x p upper triangular, nonnegative diagonal
  Index rank = 0;
};

/// Thin Householder QR with R_ii >= 0. Diagonal entries of R at or below
/// rank_tol = n * eps * scale count as numerically zero; `scale` defaults to
/// ||V||_F. The rank is reported, never thrown.
inline ThinQr qr_thin_unchecked(const Matrix& v, double scale = -1.0) {
  const Index n = v.rows();
  const Index p = v.cols();
  if (p > n) throw DimensionError("qr_thin: more columns than rows");
  Eigen::HouseholderQR<Matrix> qr(v);
  ThinQr out;
  out.q = qr.householderQ() * Matrix::Identity(n, p);
  out.r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  for (Index i = 0; i < p; ++i) {
    if (out.r(i, i) < 0.0) {
      out.r.row(i) *= -1.0;
      out.q.col(i) *= -1.0;
    }
  }
  if (scale < 0.0) scale = v.norm();
  const double tol = static_cast<double>(std::max<Index>(n, 1)) * kEps * scale;
  out.rank = 0;
  for (Index i = 0; i < p; ++i)
    if (out.r(i, i) > tol) ++out.rank;
  return out;
}

inline ThinQr qr_thin(const Matrix& v, double scale = -1.0) {
  ThinQr out = qr_thin_unchecked(v, scale);
  if (out.rank < v.cols()) {
    throw RankDeficiencyError("qr_thin: matrix has numerical rank " + std::to_string(out.rank) +
                                  " < " + std::to_string(v.cols()),
                              out.rank);
  }
  return out;
}

}  // namespace ratlanczos
