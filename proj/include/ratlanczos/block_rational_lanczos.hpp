#pragma once

#include <Eigen/LU>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ratlanczos/dense.hpp"
#include "ratlanczos/rational_lanczos.hpp"
#include "ratlanczos/shifted_solver.hpp"
#include "ratlanczos/shifts.hpp"
#include "ratlanczos/termination.hpp"

namespace ratlanczos {

struct BlockRecurrenceState;

struct BlockLanczosOptions {
  bool retain_basis = false;
  Matrix side_matrix;
  std::function<bool(const BlockRecurrenceState&)> stop;
  /// Diagonal entries of beta_j at or below breakdown_tol * (||R|| + ||S alpha||)
  /// count as zero. Negative selects n * eps.
  double breakdown_tol = -1.0;
  /// Reciprocal condition number below which Q^T S or u_j is singular.
  double singular_rcond = 1e-14;
};

struct BlockRecurrenceState {
  Index n = 0;
  Index p = 0;
  Index j = 0;
  std::vector<Matrix> alpha;  // alpha_1..alpha_j
  std::vector<Matrix> beta;   // beta_0 = 0, beta_1..beta_j (upper triangular)
  std::vector<Matrix> u;      // u_1..u_j
  std::vector<Shift> shifts;
  Matrix y, t, yhat;  // jp x p: K_j^{-1} E_j, K_j^{-T} E_j, H_j K_j^{-1} E_j
  Matrix eta;         // Qhat^T A Qhat for the newest block
  Matrix qhat, qbar, a_qhat, a_qbar;
  Matrix j_storage;
  Matrix side_storage;
  Index side_rows = 0;
  std::vector<Matrix> basis;
  Matrix start_factor;  // V = Q_1 * start_factor
  Index deficient_rank = -1;
  Termination termination = Termination::running;

  double inv(Index i) const {
    return i <= 0 ? 0.0 : shifts[static_cast<std::size_t>(i - 1)].inverse();
  }
  Matrix J() const { return j_storage.topLeftCorner(j * p, j * p); }
  bool finished() const { return termination != Termination::running; }
};

namespace detail {

inline void record_block_side(BlockRecurrenceState& st, const Matrix& u, const Matrix& q) {
  if (u.cols() == 0) return;
  const Index p = q.cols();
  if (st.side_storage.rows() < st.side_rows + p) {
    Matrix grown = Matrix::Zero(std::max(2 * st.side_storage.rows(), st.side_rows + p), u.cols());
    if (st.side_rows > 0) grown.topRows(st.side_rows) = st.side_storage.topRows(st.side_rows);
    st.side_storage.swap(grown);
  }
  st.side_storage.middleRows(st.side_rows, p) = q.transpose() * u;
  st.side_rows += p;
}

inline Eigen::PartialPivLU<Matrix> checked_lu(const Matrix& m, double rcond, const char* what,
                                              Index step) {
  Eigen::PartialPivLU<Matrix> lu(m);
  if (!(lu.rcond() > rcond)) {
    throw SingularPivotError(std::string(what) + " is singular at step " + std::to_string(step), step);
  }
  return lu;
}

}  // namespace detail

inline BlockRecurrenceState init_block_recurrence(const SparseSym& a, const Matrix& v,
                                                  const BlockLanczosOptions& opts,
                                                  Index capacity = 8) {
  if (v.rows() != a.size()) throw DimensionError("block rational Lanczos: V has wrong row count");
  if (v.cols() < 1) throw InvalidArgument("block rational Lanczos: V has no columns");
  if (opts.side_matrix.cols() > 0 && opts.side_matrix.rows() != a.size()) {
    throw DimensionError("block rational Lanczos: side matrix has wrong row count");
  }
  ThinQr qr = qr_thin(v);
  BlockRecurrenceState st;
  st.n = a.size();
  st.p = v.cols();
  st.start_factor = qr.r;
  st.qhat = std::move(qr.q);
  st.a_qhat = spmm(a, st.qhat);
  st.qbar = Matrix::Zero(st.n, st.p);
  st.a_qbar = Matrix::Zero(st.n, st.p);
  st.beta.push_back(Matrix::Zero(st.p, st.p));
  const Index cap = std::max<Index>(capacity, 1) * st.p;
  st.j_storage = Matrix::Zero(cap, cap);
  detail::record_block_side(st, opts.side_matrix, st.qhat);
  if (opts.retain_basis) st.basis.push_back(st.qhat);
  return st;
}

inline void block_lanczos_step(const SparseSym& a, ShiftedSolverCache& solver,
                               BlockRecurrenceState& st, Shift xi,
                               const BlockLanczosOptions& opts = {}) {
  if (st.finished()) throw InvalidArgument("block_lanczos_step: recurrence already terminated");
  const Index j = st.j + 1;
  const Index n = st.n;
  const Index p = st.p;
  const double inv_jm2 = st.inv(j - 2);
  const double inv_jm1 = st.inv(j - 1);
  const double inv_j = xi.inverse();
  const Matrix& beta_prev = st.beta.back();
  const Matrix eye = Matrix::Identity(p, p);

  Matrix rhs(n, 2 * p);
  rhs.leftCols(p) = st.a_qhat - (st.qbar - inv_jm2 * st.a_qbar) * beta_prev.transpose();
  rhs.rightCols(p) = st.qhat - inv_jm1 * st.a_qhat;
  const Matrix rs = solver.solve(xi, rhs);
  const auto r = rs.leftCols(p);
  const auto s = rs.rightCols(p);

  const Matrix qts = st.qhat.transpose() * s;
  auto lu_qts = detail::checked_lu(qts, opts.singular_rcond, "Q^T S", j);
  const Matrix alpha = lu_qts.solve(st.qhat.transpose() * r);
  const Matrix s_alpha = s * alpha;
  const Matrix q = r - s_alpha;
  const double btol = opts.breakdown_tol >= 0.0 ? opts.breakdown_tol : static_cast<double>(n) * kEps;
  const double scale = r.norm() + s_alpha.norm();
  ThinQr qr = qr_thin_unchecked(q, 0.0);
  Index rank = 0;
  for (Index i = 0; i < p; ++i)
    if (qr.r(i, i) > btol * scale) ++rank;
  const bool lucky = rank == 0;
  Matrix beta = lucky ? Matrix::Zero(p, p) : qr.r;

  Matrix uj;
  if (j == 1) {
    uj = eye;
    st.y = eye;
    st.t = eye;
    st.yhat = alpha;
  } else {
    const Matrix& u_prev = st.u.back();
    auto lu_prev = detail::checked_lu(u_prev, opts.singular_rcond, "u_{j-1}", j - 1);
    uj = eye + alpha * inv_jm1 -
         beta_prev * lu_prev.solve(beta_prev.transpose()) * (inv_jm1 * inv_jm2);
    auto lu_u = detail::checked_lu(uj, opts.singular_rcond, "u_j", j);
    const Matrix u_inv = lu_u.inverse();
    const Matrix u_inv_t = u_inv.transpose();
    const Index jp = j * p;
    Matrix y(jp, p), t(jp, p), yhat(jp, p);
    y.topRows(jp - p) = -st.y * beta_prev.transpose() * u_inv * inv_jm2;
    y.bottomRows(p) = u_inv;
    t.topRows(jp - p) = -st.t * beta_prev.transpose() * u_inv_t * inv_jm1;
    t.bottomRows(p) = u_inv_t;
    yhat.topRows(jp - p) = -st.yhat * beta_prev.transpose() * u_inv * inv_jm2;
    yhat.middleRows(jp - 2 * p, p) += beta_prev.transpose() * u_inv;
    yhat.bottomRows(p) = beta_prev * y.middleRows(jp - 2 * p, p) + alpha * u_inv;
    st.y.swap(y);
    st.t.swap(t);
    st.yhat.swap(yhat);
  }

  st.alpha.push_back(alpha);
  st.beta.push_back(beta);
  st.u.push_back(uj);
  st.shifts.push_back(xi);

  Matrix column = st.yhat;
  if (!lucky) {
    Matrix a_qnext = spmm(a, qr.q);
    st.eta = qr.q.transpose() * a_qnext;
    auto lu_u = detail::checked_lu(uj, opts.singular_rcond, "u_j", j);
    const Matrix middle = beta.transpose() * (eye - st.eta * inv_j) * beta * inv_j;
    column -= st.t * middle * lu_u.inverse();
    st.qbar.swap(st.qhat);
    st.a_qbar.swap(st.a_qhat);
    st.qhat = std::move(qr.q);
    st.a_qhat.swap(a_qnext);
  }

  const Index jp = j * p;
  detail::ensure_capacity(st.j_storage, jp, jp);
  const Index c0 = jp - p;
  st.j_storage.block(0, c0, jp, p) = column;
  st.j_storage.block(c0, 0, p, jp) = column.transpose();
  st.j_storage.block(c0, c0, p, p) = symmetrized(column.bottomRows(p));
  st.j = j;

  if (lucky) {
    st.termination = Termination::lucky_breakdown;
    return;
  }
  if (rank < p) {
    st.deficient_rank = rank;
    st.termination = Termination::deflation_required;
    return;
  }
  detail::record_block_side(st, opts.side_matrix, st.qhat);
  if (opts.retain_basis) st.basis.push_back(st.qhat);
}

struct BlockLanczosResult {
  Matrix J;
  std::vector<Matrix> alpha, beta, u;  // beta[0] = 0
  std::vector<Shift> shifts;
  Matrix side_projections;
  Matrix basis;
  Matrix start_factor;
  Termination termination = Termination::max_iterations;
  Index steps = 0;
  Index block_size = 0;
  Index deficient_rank = -1;
};

class BlockRationalLanczos {
 public:
  BlockRationalLanczos(const SparseSym& a, const Matrix& v, ShiftedSolverCache& solver,
                       BlockLanczosOptions opts = {}, Index capacity = 8)
      : a_(&a), solver_(&solver), opts_(std::move(opts)),
        state_(init_block_recurrence(a, v, opts_, capacity)) {}

  bool step(Shift xi) {
    block_lanczos_step(*a_, *solver_, state_, xi, opts_);
    if (!state_.finished() && opts_.stop && opts_.stop(state_)) {
      state_.termination = Termination::converged;
    }
    return !state_.finished();
  }

  const BlockRecurrenceState& state() const { return state_; }
  Index iterations() const { return state_.j; }
  Index block_size() const { return state_.p; }
  bool finished() const { return state_.finished(); }
  Termination termination() const { return state_.termination; }
  Matrix projected() const { return state_.J(); }
  Matrix side_projection() const {
    return state_.side_storage.topRows(std::min(state_.j * state_.p, state_.side_rows));
  }
  Matrix start_factor() const { return state_.start_factor; }
  Matrix last_block_t() const { return state_.t; }
  double last_beta_norm() const {
    return state_.j == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(state_.beta.back()).singularValues()(0);
  }
  Shift last_shift() const { return state_.shifts.back(); }
  Matrix basis() const {
    Matrix q(state_.n, state_.p * static_cast<Index>(state_.basis.size()));
    for (std::size_t i = 0; i < state_.basis.size(); ++i)
      q.middleCols(static_cast<Index>(i) * state_.p, state_.p) = state_.basis[i];
    return q;
  }

  BlockLanczosResult result() const {
    BlockLanczosResult r;
    r.J = projected();
    r.alpha = state_.alpha;
    r.beta = state_.beta;
    r.u = state_.u;
    r.shifts = state_.shifts;
    r.side_projections = side_projection();
    if (opts_.retain_basis) r.basis = basis();
    r.start_factor = state_.start_factor;
    r.termination = state_.termination == Termination::running ? Termination::max_iterations
                                                                : state_.termination;
    r.steps = state_.j;
    r.block_size = state_.p;
    r.deficient_rank = state_.deficient_rank;
    return r;
  }

 private:
  const SparseSym* a_;
  ShiftedSolverCache* solver_;
  BlockLanczosOptions opts_;
  BlockRecurrenceState state_;
};

/// At most m block steps from the column space of V. A rank-deficient beta_j
/// ends the run with Termination::deflation_required and the partial result.
inline BlockLanczosResult block_run(const SparseSym& a, const Matrix& v, const ShiftSequence& shifts,
                                    Index m, const BlockLanczosOptions& opts,
                                    ShiftedSolverCache& solver) {
  if (m < 1) throw InvalidArgument("block rational Lanczos: m must be >= 1");
  if (shifts.empty()) throw InvalidArgument("block rational Lanczos: empty shift list");
  if (!shifts.covers(m)) throw InvalidArgument("block rational Lanczos: fewer than m shifts");
  BlockRationalLanczos lanczos(a, v, solver, opts, m);
  for (Index j = 1; j <= m; ++j) {
    if (!lanczos.step(shifts.at(j))) break;
  }
  return lanczos.result();
}

inline BlockLanczosResult block_run(const SparseSym& a, const Matrix& v, const ShiftSequence& shifts,
                                    Index m, const BlockLanczosOptions& opts = {}) {
  ShiftedSolverCache solver(a);
  return block_run(a, v, shifts, m, opts, solver);
}

/// Block tridiagonal (m+1)p x mp matrices of A Q_{m+1} K_m = Q_{m+1} H_m.
inline std::pair<Matrix, Matrix> block_assemble_HK(const BlockLanczosResult& r) {
  const Index m = r.steps;
  const Index p = r.block_size;
  Matrix h = Matrix::Zero((m + 1) * p, m * p);
  Matrix k = Matrix::Zero((m + 1) * p, m * p);
  auto inv = [&](Index i) { return i <= 0 ? 0.0 : r.shifts[static_cast<std::size_t>(i - 1)].inverse(); };
  const Matrix eye = Matrix::Identity(p, p);
  for (Index j = 1; j <= m; ++j) {
    const Matrix& a = r.alpha[static_cast<std::size_t>(j - 1)];
    const Matrix& b = r.beta[static_cast<std::size_t>(j)];
    const Matrix& bp = r.beta[static_cast<std::size_t>(j - 1)];
    const Index c = (j - 1) * p;
    h.block(c, c, p, p) = a;
    h.block(c + p, c, p, p) = b;
    k.block(c, c, p, p) = eye + a * inv(j - 1);
    k.block(c + p, c, p, p) = b * inv(j);
    if (j >= 2) {
      h.block(c - p, c, p, p) = bp.transpose();
      k.block(c - p, c, p, p) = bp.transpose() * inv(j - 2);
    }
  }
  return {h, k};
}

}  // namespace ratlanczos
