#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ratlanczos/dense.hpp"
#include "ratlanczos/shifted_solver.hpp"
#include "ratlanczos/shifts.hpp"
#include "ratlanczos/termination.hpp"

namespace ratlanczos {

class RationalArnoldi;

struct ArnoldiOptions {
  Matrix side_matrix;
  std::function<bool(const RationalArnoldi&)> stop;
  double breakdown_tol = -1.0;  // negative selects n * eps
  bool track_orthogonality = false;
};

struct ArnoldiResult {
  Matrix Q;  // n x (m+1)p, or n x mp after a breakdown
  Matrix H, K;  // (m+1)p x mp
  Matrix J;     // m p x m p, Q_m^T A Q_m
  Matrix side_projections;
  Matrix start_factor;
  std::vector<Shift> shifts;
  std::vector<double> step_seconds;
  std::vector<double> orth_loss;
  Termination termination = Termination::max_iterations;
  Index steps = 0;
  Index block_size = 0;
};

/// Full-basis rational Arnoldi with classical Gram-Schmidt and one
/// reorthogonalization pass. Iteration j computes the continuation
/// (I - A/xi_j)^{-1} A Q_j, which also covers xi_j = inf.
class RationalArnoldi {
 public:
  RationalArnoldi(const SparseSym& a, const Matrix& v, ShiftedSolverCache& solver,
                  ArnoldiOptions opts = {})
      : a_(&a), solver_(&solver), opts_(std::move(opts)) {
    if (v.rows() != a.size()) throw DimensionError("rational Arnoldi: V has wrong row count");
    if (v.cols() < 1) throw InvalidArgument("rational Arnoldi: V has no columns");
    if (opts_.side_matrix.cols() > 0 && opts_.side_matrix.rows() != a.size()) {
      throw DimensionError("rational Arnoldi: side matrix has wrong row count");
    }
    ThinQr qr = qr_thin(v);
    p_ = v.cols();
    start_factor_ = qr.r;
    q_ = std::move(qr.q);
    aq_ = spmm(a, q_);
    j_full_ = q_.transpose() * aq_;
    j_full_ = symmetrized(j_full_);
  }

  bool step(Shift xi) {
    if (finished()) throw InvalidArgument("rational Arnoldi: already terminated");
    const auto t0 = std::chrono::steady_clock::now();
    const Index n = a_->size();
    const Index cols = q_.cols();
    Matrix w = solver_->solve(xi, aq_.rightCols(p_));
    const double wnorm = w.norm();
    Matrix h = q_.transpose() * w;
    w -= q_ * h;
    const Matrix h2 = q_.transpose() * w;
    w -= q_ * h2;
    h += h2;
    ThinQr qr = qr_thin_unchecked(w, 0.0);
    const double btol = opts_.breakdown_tol >= 0.0 ? opts_.breakdown_tol : static_cast<double>(n) * kEps;
    Index rank = 0;
    for (Index i = 0; i < p_; ++i)
      if (qr.r(i, i) > btol * wnorm) ++rank;
    const bool lucky = rank == 0;

    Matrix hcol = Matrix::Zero(cols + p_, p_);
    hcol.topRows(cols) = h;
    if (!lucky) hcol.bottomRows(p_) = qr.r;
    h_cols_.push_back(hcol);
    shifts_.push_back(xi);
    ++steps_;

    if (lucky) {
      termination_ = Termination::lucky_breakdown;
    } else if (rank < p_) {
      termination_ = Termination::deflation_required;
    } else {
      const Matrix a_new = spmm(*a_, qr.q);
      Matrix grown(cols + p_, cols + p_);
      grown.topLeftCorner(cols, cols) = j_full_;
      const Matrix cross = q_.transpose() * a_new;
      grown.topRightCorner(cols, p_) = cross;
      grown.bottomLeftCorner(p_, cols) = cross.transpose();
      grown.bottomRightCorner(p_, p_) = symmetrized(qr.q.transpose() * a_new);
      j_full_.swap(grown);
      q_.conservativeResize(Eigen::NoChange, cols + p_);
      q_.rightCols(p_) = qr.q;
      aq_.conservativeResize(Eigen::NoChange, cols + p_);
      aq_.rightCols(p_) = a_new;
    }
    if (opts_.track_orthogonality) {
      orth_loss_.push_back(
          (Matrix::Identity(q_.cols(), q_.cols()) - q_.transpose() * q_).norm());
    }
    step_seconds_.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (!finished() && opts_.stop && opts_.stop(*this)) termination_ = Termination::converged;
    return !finished();
  }

  Index iterations() const { return steps_; }
  Index block_size() const { return p_; }
  bool finished() const { return termination_ != Termination::running; }
  Termination termination() const { return termination_; }

  /// Q_m^T A Q_m for the first m blocks (the full basis after a breakdown).
  Matrix projected() const {
    const Index k = std::min(steps_ * p_, q_.cols());
    return j_full_.topLeftCorner(k, k);
  }
  Matrix side_projection() const {
    const Index k = std::min(steps_ * p_, q_.cols());
    if (opts_.side_matrix.cols() == 0) return Matrix(k, 0);
    return q_.leftCols(k).transpose() * opts_.side_matrix;
  }
  Matrix start_factor() const { return start_factor_; }
  const Matrix& basis() const { return q_; }
  const Matrix& applied_basis() const { return aq_; }

  /// ||A Q_m g - Q_m J_m g|| for a coefficient block g of m p rows.
  double residual_norm(const Matrix& g) const {
    const Index k = g.rows();
    return (aq_.leftCols(k) * g - q_.leftCols(k) * (j_full_.topLeftCorner(k, k) * g)).norm();
  }

  ArnoldiResult result() const {
    ArnoldiResult r;
    r.Q = q_;
    const Index m = steps_;
    const Index rows = (m + 1) * p_;
    r.H = Matrix::Zero(rows, m * p_);
    r.K = Matrix::Zero(rows, m * p_);
    for (Index j = 0; j < m; ++j) {
      const Matrix& hc = h_cols_[static_cast<std::size_t>(j)];
      r.H.block(0, j * p_, hc.rows(), p_) = hc;
      r.K.block(0, j * p_, hc.rows(), p_) = hc * shifts_[static_cast<std::size_t>(j)].inverse();
      r.K.block(j * p_, j * p_, p_, p_) += Matrix::Identity(p_, p_);
    }
    r.J = projected();
    r.side_projections = side_projection();
    r.start_factor = start_factor_;
    r.shifts = shifts_;
    r.step_seconds = step_seconds_;
    r.orth_loss = orth_loss_;
    r.termination = termination_ == Termination::running ? Termination::max_iterations : termination_;
    r.steps = steps_;
    r.block_size = p_;
    return r;
  }

 private:
  const SparseSym* a_;
  ShiftedSolverCache* solver_;
  ArnoldiOptions opts_;
  Index p_ = 1;
  Index steps_ = 0;
  Matrix start_factor_;
  Matrix q_, aq_, j_full_;
  std::vector<Matrix> h_cols_;
  std::vector<Shift> shifts_;
  std::vector<double> step_seconds_, orth_loss_;
  Termination termination_ = Termination::running;
};

inline ArnoldiResult arnoldi_run(const SparseSym& a, const Matrix& v, const ShiftSequence& shifts,
                                 Index m, const ArnoldiOptions& opts, ShiftedSolverCache& solver) {
  if (m < 1) throw InvalidArgument("rational Arnoldi: m must be >= 1");
  if (!shifts.covers(m)) throw InvalidArgument("rational Arnoldi: fewer than m shifts");
  RationalArnoldi arnoldi(a, v, solver, opts);
  for (Index j = 1; j <= m; ++j) {
    if (!arnoldi.step(shifts.at(j))) break;
  }
  return arnoldi.result();
}

inline ArnoldiResult arnoldi_run(const SparseSym& a, const Matrix& v, const ShiftSequence& shifts,
                                 Index m, const ArnoldiOptions& opts = {}) {
  ShiftedSolverCache solver(a);
  return arnoldi_run(a, v, shifts, m, opts, solver);
}

}  // namespace ratlanczos
