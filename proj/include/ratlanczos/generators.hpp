#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ratlanczos/control.hpp"
#include "ratlanczos/sparse_sym.hpp"
#include "ratlanczos/trace.hpp"

namespace ratlanczos {

/// 5-point Laplacian on the unit square with Dirichlet boundary:
/// 1/(nbar-1)^2 (T kron I + I kron T), T = tridiag(1, -2, 1). Grid point
/// (a, b) has index a * nbar + b.
inline SparseSym laplacian2d(Index nbar) {
  if (nbar < 3) throw InvalidArgument("laplacian2d: nbar must be >= 3");
  const double h2 = 1.0 / static_cast<double>((nbar - 1) * (nbar - 1));
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(5 * nbar * nbar));
  for (Index a = 0; a < nbar; ++a) {
    for (Index b = 0; b < nbar; ++b) {
      const auto i = static_cast<int>(a * nbar + b);
      t.emplace_back(i, i, -4.0 * h2);
      if (a > 0) t.emplace_back(i, i - static_cast<int>(nbar), h2);
      if (a + 1 < nbar) t.emplace_back(i, i + static_cast<int>(nbar), h2);
      if (b > 0) t.emplace_back(i, i - 1, h2);
      if (b + 1 < nbar) t.emplace_back(i, i + 1, h2);
    }
  }
  return SparseSym::from_triplets(nbar * nbar, t, Definiteness::negative);
}

/// Diagonal with lambda_i = lam1 + (i-1)/(n-1) (lamn - lam1) rho^(n-i).
inline Vector strakos_spectrum(Index n, double lam1, double lamn, double rho) {
  if (n < 2) throw InvalidArgument("strakos: n must be >= 2");
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("strakos: rho must lie in (0, 1]");
  if (!(lam1 < lamn)) throw InvalidArgument("strakos: need lam1 < lamn");
  Vector d(n);
  for (Index i = 1; i <= n; ++i) {
    d(i - 1) = lam1 + static_cast<double>(i - 1) / static_cast<double>(n - 1) * (lamn - lam1) *
                          std::pow(rho, static_cast<double>(n - i));
  }
  return d;
}

inline SparseSym strakos(Index n, double lam1, double lamn, double rho) {
  const Vector d = strakos_spectrum(n, lam1, lamn, rho);
  return SparseSym::diagonal(d, lam1 > 0.0 ? Definiteness::positive : Definiteness::unknown);
}

struct Box {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
};

/// 0/1 vector of grid points (a/(nbar-1), b/(nbar-1)) inside the closed box.
inline Vector indicator(Index nbar, const Box& box) {
  if (nbar < 2) throw InvalidArgument("indicator: nbar must be >= 2");
  const double h = 1.0 / static_cast<double>(nbar - 1);
  const double eps = 1e-12;
  Vector v = Vector::Zero(nbar * nbar);
  for (Index a = 0; a < nbar; ++a) {
    const double x = static_cast<double>(a) * h;
    if (x < box.x0 - eps || x > box.x1 + eps) continue;
    for (Index b = 0; b < nbar; ++b) {
      const double y = static_cast<double>(b) * h;
      if (y >= box.y0 - eps && y <= box.y1 + eps) v(a * nbar + b) = 1.0;
    }
  }
  return v;
}

/// n points uniform in [0,1]^2 from a seeded 64-bit Mersenne twister.
inline std::vector<Point2> uniform_points(Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<Point2> pts(static_cast<std::size_t>(n));
  for (Point2& p : pts) {
    p[0] = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    p[1] = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  }
  return pts;
}

/// D^{-1/2} A D^{-1/2} - 2 I with D the row sums of |A|.
inline SparseSym normalize_adjacency(const SparseSym& a) {
  const Index n = a.size();
  Vector deg = Vector::Zero(n);
  const CsrMatrix& m = a.csr();
  for (Index r = 0; r < n; ++r)
    for (CsrMatrix::InnerIterator it(m, r); it; ++it) deg(r) += std::abs(it.value());
  Vector s(n);
  for (Index i = 0; i < n; ++i) s(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(m.nonZeros() + n));
  for (Index r = 0; r < n; ++r)
    for (CsrMatrix::InnerIterator it(m, r); it; ++it)
      t.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value() * (s(r) * s(it.col())));
  for (Index i = 0; i < n; ++i) t.emplace_back(static_cast<int>(i), static_cast<int>(i), -2.0);
  return SparseSym::from_triplets(n, t, Definiteness::negative);
}

/// LQR test system on the nbar x nbar Laplacian: B the indicator of
/// [0.2,0.8]^2, C the indicator of [0.1,0.9]^2, R = 1, x0 = 1/(nbar-1).
inline LtiSystem laplacian_lqr_system(Index nbar) {
  LtiSystem sys;
  sys.A = laplacian2d(nbar);
  sys.B = indicator(nbar, {0.2, 0.8, 0.2, 0.8});
  sys.C = indicator(nbar, {0.1, 0.9, 0.1, 0.9}).transpose();
  sys.R = Matrix::Identity(1, 1);
  sys.x0 = Vector::Constant(nbar * nbar, 1.0 / static_cast<double>(nbar - 1));
  return sys;
}

}  // namespace ratlanczos
