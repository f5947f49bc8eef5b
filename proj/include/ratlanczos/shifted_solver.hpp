#pragma once

#include <cassert>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "ratlanczos/shift.hpp"
#include "ratlanczos/sparse_sym.hpp"

namespace ratlanczos {

enum class SolverMethod { automatic, dense_cholesky, sparse_ldl, iterative_cg };

inline constexpr Index kDenseSolverLimit = 2000;
inline constexpr double kCgTolerance = 1e-14;

/// Reusable factorization of I - A/xi. For the infinite shift the operator is
/// the identity and solving is a copy. Read-only after construction, so one
/// instance may serve concurrent solves.
class ShiftedFactorization {
 public:
  using ColMajorSparse = Eigen::SparseMatrix<double, Eigen::ColMajor>;

  ShiftedFactorization(const SparseSym& a, Shift xi, SolverMethod method = SolverMethod::automatic)
      : shift_(xi), n_(a.size()) {
    if (xi.is_infinite()) {
      method_ = SolverMethod::automatic;
      return;
    }
    if (method == SolverMethod::automatic) {
      method = n_ <= kDenseSolverLimit ? SolverMethod::dense_cholesky : SolverMethod::sparse_ldl;
    }
    method_ = method;
    ColMajorSparse op = shifted_operator(a, xi);
    switch (method) {
      case SolverMethod::dense_cholesky: {
        auto llt = std::make_shared<Eigen::LLT<Matrix>>(Matrix(op));
        if (llt->info() != Eigen::Success) indefinite();
        factors_ = std::move(llt);
        break;
      }
      case SolverMethod::sparse_ldl: {
        auto ldl = std::make_shared<Eigen::SimplicialLDLT<ColMajorSparse>>();
        ldl->compute(op);
        if (ldl->info() != Eigen::Success || ldl->vectorD().minCoeff() <= 0.0) indefinite();
        factors_ = std::move(ldl);
        break;
      }
      case SolverMethod::iterative_cg: {
        auto cg = std::make_shared<CgState>();
        cg->op = op;
        cg->solver.setTolerance(kCgTolerance);
        cg->solver.setMaxIterations(std::max<Index>(10 * n_, 1000));
        cg->solver.compute(cg->op);
        if (cg->op.diagonal().minCoeff() <= 0.0) indefinite();
        factors_ = std::move(cg);
        break;
      }
      default: break;
    }
  }

  Shift shift() const { return shift_; }
  SolverMethod method() const { return method_; }
  Index size() const { return n_; }

  /// Solves (I - A/xi) X = B column by column against the same factors.
  Matrix solve(const Matrix& b) const {
    if (b.rows() != n_) {
      throw DimensionError("shifted solve: right-hand side has " + std::to_string(b.rows()) +
                           " rows, expected " + std::to_string(n_));
    }
    if (b.cols() < 1) throw DimensionError("shifted solve: no right-hand sides");
    if (shift_.is_infinite()) return b;
    Matrix x;
    if (auto* llt = std::get_if<DensePtr>(&factors_)) {
      x = (*llt)->solve(b);
    } else if (auto* ldl = std::get_if<LdlPtr>(&factors_)) {
      x = (*ldl)->solve(b);
    } else if (auto* cg = std::get_if<CgPtr>(&factors_)) {
      x.resize(b.rows(), b.cols());
      for (Index c = 0; c < b.cols(); ++c) {
        x.col(c) = (*cg)->solver.solve(b.col(c));
        if ((*cg)->solver.info() != Eigen::Success) {
          throw ConvergenceError("shifted solve: CG did not converge for shift " + shift_.to_string());
        }
      }
    }
    return x;
  }

  Vector solve(const Vector& b) const { return solve(Matrix(b)).col(0); }

 private:
  struct CgState {
    ColMajorSparse op;
    Eigen::ConjugateGradient<ColMajorSparse, Eigen::Lower | Eigen::Upper> solver;
  };
  using DensePtr = std::shared_ptr<Eigen::LLT<Matrix>>;
  using LdlPtr = std::shared_ptr<Eigen::SimplicialLDLT<ColMajorSparse>>;
  using CgPtr = std::shared_ptr<CgState>;

  static ColMajorSparse shifted_operator(const SparseSym& a, Shift xi) {
    ColMajorSparse id(a.size(), a.size());
    id.setIdentity();
    ColMajorSparse op = id - xi.inverse() * ColMajorSparse(a.csr());
    op.makeCompressed();
    return op;
  }

  [[noreturn]] void indefinite() const {
    throw IndefiniteShiftError(
        "I - A/xi is not positive definite for shift xi = " + shift_.to_string(), shift_.value());
  }

  Shift shift_;
  Index n_ = 0;
  SolverMethod method_ = SolverMethod::automatic;
  std::variant<std::monostate, DensePtr, LdlPtr, CgPtr> factors_;
};

inline ShiftedFactorization shifted_factorize(const SparseSym& a, Shift xi,
                                              SolverMethod method = SolverMethod::automatic) {
  return ShiftedFactorization(a, xi, method);
}

inline Matrix shifted_solve_multi(const ShiftedFactorization& f, const Matrix& b) {
  return f.solve(b);
}

/// Lazily factors I - A/xi once per distinct shift value. Cycled pole
/// sequences therefore pay for each factorization only once.
class ShiftedSolverCache {
 public:
  explicit ShiftedSolverCache(const SparseSym& a, SolverMethod method = SolverMethod::automatic)
      : a_(&a), method_(method) {}

  const SparseSym& matrix() const { return *a_; }

  std::shared_ptr<const ShiftedFactorization> get(Shift xi) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(xi.value());
    if (it != cache_.end()) return it->second;
    auto f = std::make_shared<const ShiftedFactorization>(*a_, xi, method_);
    cache_.emplace(xi.value(), f);
    return f;
  }

  Matrix solve(Shift xi, const Matrix& b) {
    auto f = get(xi);
    Matrix x = f->solve(b);
#ifndef NDEBUG
    if (!xi.is_infinite()) {
      const Matrix res = x - xi.inverse() * spmm(*a_, x) - b;
      assert(res.norm() <= 1e-8 * (b.norm() + 1.0));
    }
#endif
    return x;
  }

  std::size_t factorizations() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

 private:
  const SparseSym* a_;
  SolverMethod method_;
  mutable std::mutex mu_;
  std::map<double, std::shared_ptr<const ShiftedFactorization>> cache_;
};

}  // namespace ratlanczos
