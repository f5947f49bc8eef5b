#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ratlanczos/dense.hpp"
#include "ratlanczos/shifted_solver.hpp"
#include "ratlanczos/shifts.hpp"
#include "ratlanczos/termination.hpp"

namespace ratlanczos {

struct RecurrenceState;

struct LanczosOptions {
  bool retain_basis = false;
  /// Optional n x k matrix U; row i of the side projection is q_i^T U.
  Matrix side_matrix;
  /// Evaluated after every step; returning true stops the run as converged.
  std::function<bool(const RecurrenceState&)> stop;
  /// beta_j <= breakdown_tol * (||r|| + |alpha_j| ||s||) is a lucky breakdown.
  /// Negative selects n * eps.
  double breakdown_tol = -1.0;
  /// |s^T q_j| <= pivot_tol * ||s|| makes alpha_j undefined.
  double pivot_tol = 1e-14;
  /// |omega_j| <= singular_tol * (1 + |alpha_j / xi_{j-1}|) means K_j is
  /// numerically singular.
  double singular_tol = 1e-13;
};

/// Rolling state of the Q-less recurrence after j completed steps. Only the
/// current and previous basis vectors (and their images under A) are kept;
/// everything else is O(j).
struct RecurrenceState {
  Index n = 0;
  Index j = 0;
  std::vector<double> alpha;        // alpha_1..alpha_j
  std::vector<double> beta{0.0};    // beta_0 = 0, beta_1..beta_j
  std::vector<double> omega;        // omega_1..omega_j
  std::vector<Shift> shifts;        // xi_1..xi_j
  Vector y, t, yhat;                // K_j^{-1} e_j, K_j^{-T} e_j, H_j y_j
  double eta = 0.0;                 // q_{j+1}^T A q_{j+1}
  Vector qhat, qbar;                // q_{j+1}, q_j
  Vector a_qhat, a_qbar;            // A q_{j+1}, A q_j
  Matrix j_storage;                 // leading j x j block is J_j
  Matrix side_storage;              // leading rows are q_i^T U
  Index side_rows = 0;
  std::vector<Vector> basis;        // q_1..q_{j+1} when retained
  double v_norm = 0.0;
  double last_r_norm = 0.0;
  Termination termination = Termination::running;

  /// 1/xi_i with xi_{-1} = xi_0 = inf.
  double inv(Index i) const {
    return i <= 0 ? 0.0 : shifts[static_cast<std::size_t>(i - 1)].inverse();
  }

  Matrix J() const { return j_storage.topLeftCorner(j, j); }
  bool finished() const { return termination != Termination::running; }
};

namespace detail {

inline void ensure_capacity(Matrix& m, Index rows, Index cols) {
  if (m.rows() >= rows && m.cols() >= cols) return;
  Matrix grown = Matrix::Zero(std::max(rows, 2 * m.rows()), std::max(cols, 2 * m.cols()));
  grown.topLeftCorner(m.rows(), m.cols()) = m;
  m.swap(grown);
}

inline void record_side(RecurrenceState& st, const Matrix& u, const Vector& q) {
  if (u.cols() == 0) return;
  if (st.side_storage.rows() <= st.side_rows) {
    Matrix grown = Matrix::Zero(std::max<Index>(2 * st.side_storage.rows(), st.side_rows + 1), u.cols());
    if (st.side_rows > 0) grown.topRows(st.side_rows) = st.side_storage.topRows(st.side_rows);
    st.side_storage.swap(grown);
  }
  st.side_storage.row(st.side_rows++) = (u.transpose() * q).transpose();
}

}  // namespace detail

/// State before the first step: q_1 = v / ||v||, q_0 = 0, beta_0 = 0.
inline RecurrenceState init_recurrence(const SparseSym& a, const Vector& v,
                                       const LanczosOptions& opts, Index capacity = 8) {
  if (v.size() != a.size()) throw DimensionError("rational Lanczos: v has wrong length");
  const double nv = v.norm();
  if (!(nv > 0.0)) throw InvalidArgument("rational Lanczos: starting vector is zero");
  if (opts.side_matrix.cols() > 0 && opts.side_matrix.rows() != a.size()) {
    throw DimensionError("rational Lanczos: side matrix has wrong row count");
  }
  RecurrenceState st;
  st.n = a.size();
  st.v_norm = nv;
  st.qhat = v / nv;
  st.a_qhat = spmv(a, st.qhat);
  st.qbar = Vector::Zero(st.n);
  st.a_qbar = Vector::Zero(st.n);
  st.j_storage = Matrix::Zero(std::max<Index>(capacity, 1), std::max<Index>(capacity, 1));
  if (opts.side_matrix.cols() > 0) {
    st.side_storage = Matrix::Zero(std::max<Index>(capacity, 1) + 1, opts.side_matrix.cols());
    detail::record_side(st, opts.side_matrix, st.qhat);
  }
  if (opts.retain_basis) st.basis.push_back(st.qhat);
  return st;
}

/// One iteration of the Q-less rational Lanczos recurrence consuming xi_j.
/// On return J_j is complete and q_{j+1} is current (unless the subspace
/// became invariant, in which case the state is frozen with J_j final).
inline void lanczos_step(const SparseSym& a, ShiftedSolverCache& solver, RecurrenceState& st,
                         Shift xi, const LanczosOptions& opts = {}) {
  if (st.finished()) throw InvalidArgument("lanczos_step: recurrence already terminated");
  const Index j = st.j + 1;
  const Index n = st.n;
  const double inv_jm2 = st.inv(j - 2);
  const double inv_jm1 = st.inv(j - 1);
  const double inv_j = xi.inverse();
  const double beta_prev = st.beta.back();

  Matrix rhs(n, 2);
  rhs.col(0) = st.a_qhat - beta_prev * (st.qbar - inv_jm2 * st.a_qbar);
  rhs.col(1) = st.qhat - inv_jm1 * st.a_qhat;
  const Matrix rs = solver.solve(xi, rhs);

  const double s_norm = rs.col(1).norm();
  const double denom = rs.col(1).dot(st.qhat);
  if (!(std::abs(denom) > opts.pivot_tol * s_norm)) {
    throw SingularPivotError("lanczos_step: s^T q vanished at step " + std::to_string(j), j);
  }
  const double alpha = rs.col(0).dot(st.qhat) / denom;
  Vector q = rs.col(0) - alpha * rs.col(1);
  double beta = q.norm();
  const double scale = rs.col(0).norm() + std::abs(alpha) * s_norm;
  const double btol = opts.breakdown_tol >= 0.0 ? opts.breakdown_tol : static_cast<double>(n) * kEps;
  const bool lucky = beta <= btol * scale;
  if (lucky) beta = 0.0;
  st.last_r_norm = scale;

  // omega_j and the last columns of K_j^{-1}, K_j^{-T} and H_j K_j^{-1}.
  double omega = 1.0;
  if (j == 1) {
    st.y = Vector::Ones(1);
    st.t = Vector::Ones(1);
    st.yhat = Vector::Constant(1, alpha);
  } else {
    omega = alpha * inv_jm1 + 1.0 -
            beta_prev * beta_prev * inv_jm1 * inv_jm2 / st.omega.back();
    if (!(std::abs(omega) > opts.singular_tol * (1.0 + std::abs(alpha * inv_jm1)))) {
      throw SingularPivotError("lanczos_step: K_j nearly singular (omega_" + std::to_string(j) +
                                   " = " + std::to_string(omega) + ")",
                               j);
    }
    Vector y(j), t(j), yhat(j);
    y.head(j - 1) = -st.y * (beta_prev * inv_jm2 / omega);
    y(j - 1) = 1.0 / omega;
    t.head(j - 1) = -st.t * (beta_prev * inv_jm1 / omega);
    t(j - 1) = 1.0 / omega;
    yhat.head(j - 1) = -st.yhat * (beta_prev * inv_jm2 / omega);
    yhat(j - 1) = beta_prev * y(j - 2) + alpha / omega;
    yhat(j - 2) += beta_prev / omega;
    st.y.swap(y);
    st.t.swap(t);
    st.yhat.swap(yhat);
  }

  st.alpha.push_back(alpha);
  st.beta.push_back(beta);
  st.omega.push_back(omega);
  st.shifts.push_back(xi);

  Vector column = st.yhat;
  if (!lucky) {
    Vector qnext = q / beta;
    Vector a_qnext = spmv(a, qnext);
    st.eta = qnext.dot(a_qnext);
    column -= (beta * beta * (inv_j - st.eta * inv_j * inv_j) / omega) * st.t;
    st.qbar.swap(st.qhat);
    st.a_qbar.swap(st.a_qhat);
    st.qhat.swap(qnext);
    st.a_qhat.swap(a_qnext);
  }

  detail::ensure_capacity(st.j_storage, j, j);
  for (Index i = 0; i < j; ++i) {
    st.j_storage(i, j - 1) = column(i);
    st.j_storage(j - 1, i) = column(i);
  }
  st.j = j;

  if (lucky) {
    st.termination = Termination::lucky_breakdown;
    return;
  }
  detail::record_side(st, opts.side_matrix, st.qhat);
  if (opts.retain_basis) st.basis.push_back(st.qhat);
}

/// K_j y = e_j and K_j^T t = e_j as maintained by the recurrence.
inline std::pair<Vector, Vector> solve_K_columns(const RecurrenceState& st) {
  return {st.y, st.t};
}

struct LanczosResult {
  Matrix J;
  std::vector<double> alpha, beta, omega;  // beta[0] = beta_0 = 0
  std::vector<Shift> shifts;
  Matrix side_projections;  // Q_m^T U
  Matrix basis;             // Q_{m+1} (or Q_m after a breakdown), if retained
  Termination termination = Termination::max_iterations;
  Index steps = 0;
  double v_norm = 0.0;
};

/// Step-by-step driver around the recurrence.
class RationalLanczos {
 public:
  RationalLanczos(const SparseSym& a, const Vector& v, ShiftedSolverCache& solver,
                  LanczosOptions opts = {}, Index capacity = 8)
      : a_(&a), solver_(&solver), opts_(std::move(opts)),
        state_(init_recurrence(a, v, opts_, capacity)) {}

  /// Returns false once terminated (breakdown or stop callback).
  bool step(Shift xi) {
    lanczos_step(*a_, *solver_, state_, xi, opts_);
    if (!state_.finished() && opts_.stop && opts_.stop(state_)) {
      state_.termination = Termination::converged;
    }
    return !state_.finished();
  }

  const RecurrenceState& state() const { return state_; }
  const LanczosOptions& options() const { return opts_; }
  Index iterations() const { return state_.j; }
  Index block_size() const { return 1; }
  bool finished() const { return state_.finished(); }
  Termination termination() const { return state_.termination; }

  Matrix projected() const { return state_.J(); }
  Matrix side_projection() const {
    return state_.side_storage.topRows(std::min(state_.j, state_.side_rows));
  }
  /// Starting block factor: V = q_1 * ||v||.
  Matrix start_factor() const { return Matrix::Constant(1, 1, state_.v_norm); }
  /// e_j^T K_j^{-1} as row vector, i.e. t_j^T.
  Matrix last_block_t() const { return state_.t; }
  double last_beta_norm() const { return state_.beta.back(); }
  Shift last_shift() const { return state_.shifts.back(); }
  Matrix basis() const {
    Matrix q(state_.n, static_cast<Index>(state_.basis.size()));
    for (std::size_t i = 0; i < state_.basis.size(); ++i) q.col(static_cast<Index>(i)) = state_.basis[i];
    return q;
  }

  LanczosResult result() const {
    LanczosResult r;
    r.J = projected();
    r.alpha = state_.alpha;
    r.beta = state_.beta;
    r.omega = state_.omega;
    r.shifts = state_.shifts;
    r.side_projections = side_projection();
    if (opts_.retain_basis) r.basis = basis();
    r.termination = state_.termination == Termination::running ? Termination::max_iterations
                                                                : state_.termination;
    r.steps = state_.j;
    r.v_norm = state_.v_norm;
    return r;
  }

 private:
  const SparseSym* a_;
  ShiftedSolverCache* solver_;
  LanczosOptions opts_;
  RecurrenceState state_;
};

/// At most m steps of the Q-less recurrence from v with poles shifts.at(1..m).
inline LanczosResult run(const SparseSym& a, const Vector& v, const ShiftSequence& shifts,
                         Index m, const LanczosOptions& opts, ShiftedSolverCache& solver) {
  if (m < 1) throw InvalidArgument("rational Lanczos: m must be >= 1");
  if (shifts.empty()) throw InvalidArgument("rational Lanczos: empty shift list");
  if (!shifts.covers(m)) throw InvalidArgument("rational Lanczos: fewer than m shifts");
  RationalLanczos lanczos(a, v, solver, opts, m);
  for (Index j = 1; j <= m; ++j) {
    if (!lanczos.step(shifts.at(j))) break;
  }
  return lanczos.result();
}

inline LanczosResult run(const SparseSym& a, const Vector& v, const ShiftSequence& shifts,
                         Index m, const LanczosOptions& opts = {}) {
  ShiftedSolverCache solver(a);
  return run(a, v, shifts, m, opts, solver);
}

/// The (m+1) x m matrices of A Q_{m+1} K_m = Q_{m+1} H_m. After a breakdown
/// at step m the last row is zero.
inline std::pair<Matrix, Matrix> assemble_HK(const LanczosResult& r) {
  const Index m = r.steps;
  Matrix h = Matrix::Zero(m + 1, m);
  Matrix k = Matrix::Zero(m + 1, m);
  auto inv = [&](Index i) { return i <= 0 ? 0.0 : r.shifts[static_cast<std::size_t>(i - 1)].inverse(); };
  for (Index j = 1; j <= m; ++j) {
    const double a = r.alpha[static_cast<std::size_t>(j - 1)];
    const double b = r.beta[static_cast<std::size_t>(j)];
    const double bp = r.beta[static_cast<std::size_t>(j - 1)];
    h(j - 1, j - 1) = a;
    h(j, j - 1) = b;
    k(j - 1, j - 1) = 1.0 + a * inv(j - 1);
    k(j, j - 1) = b * inv(j);
    if (j >= 2) {
      h(j - 2, j - 1) = bp;
      k(j - 2, j - 1) = bp * inv(j - 2);
    }
  }
  return {h, k};
}

}  // namespace ratlanczos
