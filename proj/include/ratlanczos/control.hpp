#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ratlanczos/block_rational_lanczos.hpp"
#include "ratlanczos/dense.hpp"
#include "ratlanczos/forms.hpp"
#include "ratlanczos/matrix_equations.hpp"
#include "ratlanczos/rational_arnoldi.hpp"
#include "ratlanczos/shifts.hpp"

namespace ratlanczos {

/// E x' = A x + B u, y = C x, x(0) = x0, with optional diagonal mass E and
/// input weight R.
struct LtiSystem {
  SparseSym A;
  Matrix B;  // n x p
  Matrix C;  // q x n
  Vector E;  // diagonal of E, empty for the identity
  Vector x0;
  Matrix R;  // p x p, empty for the identity

  Index n() const { return A.size(); }
  Index inputs() const { return B.cols(); }
  Index outputs() const { return C.rows(); }

  void validate() const {
    if (B.rows() != n()) throw DimensionError("LtiSystem: B must have n rows");
    if (C.cols() != n()) throw DimensionError("LtiSystem: C must have n columns");
    if (E.size() != 0 && E.size() != n()) throw DimensionError("LtiSystem: E must have n entries");
    if (x0.size() != 0 && x0.size() != n()) throw DimensionError("LtiSystem: x0 must have n entries");
    if (R.size() != 0 && (R.rows() != inputs() || R.cols() != inputs())) {
      throw DimensionError("LtiSystem: R must be p x p");
    }
  }

  Matrix r_inverse() const {
    if (R.size() == 0) return Matrix::Identity(inputs(), inputs());
    Eigen::LLT<Matrix> llt(R);
    if (llt.info() != Eigen::Success) throw InvalidArgument("LtiSystem: R is not SPD");
    return llt.solve(Matrix::Identity(inputs(), inputs()));
  }
};

/// B(mu) = B1 + B2 b(mu), C(mu) = C1 + c(mu) C2, integrated with a quadrature
/// rule (nodes, weights).
struct ParametricIO {
  Matrix B1, B2;  // n x p each; B2 may be empty
  Matrix C1, C2;  // q x n each; C2 may be empty
  std::function<Matrix(double)> b;  // p x p
  std::function<Matrix(double)> c;  // q x q
  std::vector<double> nodes, weights;
};

struct ReducedController {
  Index m = 0;     // block iterations
  Matrix J;        // Q_m^T A Q_m
  Matrix B_m;      // Q_m^T B
  Matrix Y;        // reduced Riccati solution
  Vector z0;       // Q_m^T x0
  Matrix Rinv;
  Matrix gain;     // Rinv B_m^T Y
  Matrix closed;   // J - B_m Rinv B_m^T Y

  Index inputs() const { return Rinv.rows(); }
};

struct ControlOptions {
  double tol = 1e-8;
  Index lag = 1;
  Index max_m = 100;
  Method method = Method::qless_lanczos;
  SolverMethod solver = SolverMethod::automatic;
  bool retain_basis = false;
  CareOptions care;

  void validate() const {
    if (!(tol > 0.0)) throw InvalidArgument("control: tol must be positive");
    if (lag < 1 || lag >= max_m) throw InvalidArgument("control: need 1 <= s < max_m");
  }
};

struct H2Result {
  double norm = 0.0;
  std::vector<double> history;
  std::vector<double> change_history;  // relative change with lag s
  Index iterations = 0;
  bool converged = false;
  Termination termination = Termination::max_iterations;
  std::string seed;  // "C^T" or "B"
  Matrix J, Y, side;
  Matrix basis;  // retained basis, if requested (always for Arnoldi)
  std::vector<std::string> warnings;
};

struct LqrResult {
  ReducedController controller;
  std::vector<double> metric_history;  // NaN until m > s
  Index iterations = 0;
  bool converged = false;
  Termination termination = Termination::max_iterations;
  Matrix basis;
  std::vector<std::string> warnings;
};

/// E^{-1/2} A E^{-1/2}, E^{-1/2} B, C E^{-1/2}, E^{1/2} x0.
inline LtiSystem mass_transform(const LtiSystem& sys) {
  sys.validate();
  LtiSystem out = sys;
  if (sys.E.size() == 0) return out;
  if ((sys.E.array() <= 0.0).any()) throw InvalidArgument("mass_transform: E must be positive");
  const Vector s = sys.E.cwiseSqrt().cwiseInverse();
  CsrMatrix m = sys.A.csr();
  for (Index r = 0; r < m.outerSize(); ++r)
    for (CsrMatrix::InnerIterator it(m, r); it; ++it) it.valueRef() *= s(it.row()) * s(it.col());
  out.A = SparseSym(std::move(m), sys.A.definiteness_hint());
  out.B = s.asDiagonal() * sys.B;
  out.C = sys.C * s.asDiagonal();
  if (sys.x0.size() != 0) out.x0 = sys.E.cwiseSqrt().cwiseProduct(sys.x0);
  out.E.resize(0);
  return out;
}

namespace detail {

template <class Fn>
auto with_block_engine(const SparseSym& a, const Matrix& seed, const Matrix& side,
                       ShiftedSolverCache& solver, const ControlOptions& opts, Fn&& fn) {
  if (opts.method == Method::arnoldi) {
    ArnoldiOptions o;
    o.side_matrix = side;
    RationalArnoldi eng(a, seed, solver, o);
    return fn(eng);
  }
  BlockLanczosOptions o;
  o.side_matrix = side;
  o.retain_basis = opts.retain_basis;
  BlockRationalLanczos eng(a, seed, solver, o, opts.max_m);
  return fn(eng);
}

inline Matrix seed_gramian_rhs(Index rows, const Matrix& gamma, const Matrix& middle) {
  const Index p = gamma.rows();
  Matrix w = Matrix::Zero(rows, rows);
  w.topLeftCorner(p, p) = gamma * middle * gamma.transpose();
  return symmetrized(w);
}

inline std::vector<std::string> stability_warnings(const SparseSym& a) {
  std::vector<std::string> w;
  if (a.definiteness_hint() != Definiteness::negative) {
    w.push_back(std::string("A is not flagged negative definite (hint: ") +
                to_string(a.definiteness_hint()) + "); stability is checked on the projections only");
  }
  return w;
}

inline bool is_zero(const Matrix& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; }

}  // namespace detail

/// H2 norm of (A, B, C) through the projected Lyapunov equation on the
/// block rational Krylov space of C^T (q <= p) or B (q > p).
inline H2Result h2_norm(const LtiSystem& sys_in, const ShiftSequence& shifts_in,
                        const ControlOptions& opts = {}) {
  opts.validate();
  const LtiSystem sys = mass_transform(sys_in);
  H2Result out;
  out.warnings = detail::stability_warnings(sys.A);
  const bool use_c = sys.outputs() <= sys.inputs();
  out.seed = use_c ? "C^T" : "B";
  const Matrix seed = use_c ? Matrix(sys.C.transpose()) : sys.B;
  const Matrix side = use_c ? sys.B : Matrix(sys.C.transpose());
  if (detail::is_zero(seed) || detail::is_zero(side)) {
    out.converged = true;
    out.termination = Termination::converged;
    out.history.push_back(0.0);
    return out;
  }
  const ShiftSequence shifts = detail::resolve_shifts(sys.A, shifts_in);
  const Index max_m = detail::effective_max(shifts, opts.max_m);
  ShiftedSolverCache solver(sys.A, opts.solver);
  return detail::with_block_engine(sys.A, seed, side, solver, opts, [&](auto& eng) {
    const Matrix gamma = eng.start_factor();
    const Matrix eye = Matrix::Identity(gamma.rows(), gamma.rows());
    for (Index j = 1; j <= max_m; ++j) {
      const bool more = eng.step(shifts.at(j));
      const Matrix jm = eng.projected();
      const Matrix y = lyap_sym(jm, detail::seed_gramian_rhs(jm.rows(), gamma, eye));
      const Matrix s = eng.side_projection();
      const double nrm = std::sqrt(std::max(0.0, (s.transpose() * y * s).trace()));
      out.history.push_back(nrm);
      out.iterations = j;
      out.norm = nrm;
      out.J = jm;
      out.Y = y;
      out.side = s;
      double change = std::numeric_limits<double>::quiet_NaN();
      if (j > opts.lag) {
        const double prev = out.history[static_cast<std::size_t>(j - 1 - opts.lag)];
        change = nrm > 0.0 ? std::abs(nrm - prev) / nrm : std::abs(nrm - prev);
      }
      out.change_history.push_back(change);
      if (change <= opts.tol) {
        out.converged = true;
        out.termination = Termination::converged;
        break;
      }
      if (!more) {
        out.termination = eng.termination();
        out.converged = out.termination == Termination::lucky_breakdown;
        break;
      }
    }
    if (opts.retain_basis || opts.method == Method::arnoldi) out.basis = eng.basis();
    return out;
  });
}

/// Quadrature approximation of the H2 x L2 norm of a system with affine
/// parameter dependence, from one space built on [C1^T, C2^T].
inline H2Result h2_param_norm(const SparseSym& a, const ParametricIO& pio,
                              const ShiftSequence& shifts_in, const ControlOptions& opts = {}) {
  opts.validate();
  const Index n = a.size();
  if (pio.B1.rows() != n || pio.C1.cols() != n) throw DimensionError("h2_param_norm: B1/C1 size");
  if (pio.nodes.size() != pio.weights.size() || pio.nodes.empty()) {
    throw InvalidArgument("h2_param_norm: need matching, nonempty nodes and weights");
  }
  for (double w : pio.weights)
    if (!(w > 0.0)) throw InvalidArgument("h2_param_norm: quadrature weights must be positive");
  const Index p = pio.B1.cols();
  const Index q = pio.C1.rows();
  const bool has_b2 = pio.B2.size() != 0;
  const bool has_c2 = pio.C2.size() != 0 && !detail::is_zero(pio.C2);
  if (has_b2 && (pio.B2.rows() != n || pio.B2.cols() != p)) throw DimensionError("h2_param_norm: B2 size");
  if (pio.C2.size() != 0 && (pio.C2.rows() != q || pio.C2.cols() != n)) {
    throw DimensionError("h2_param_norm: C2 size");
  }
  if (has_b2 && !pio.b) throw InvalidArgument("h2_param_norm: B2 given without b(mu)");
  if (has_c2 && !pio.c) throw InvalidArgument("h2_param_norm: C2 given without c(mu)");

  Matrix seed(n, has_c2 ? 2 * q : q);
  seed.leftCols(q) = pio.C1.transpose();
  if (has_c2) seed.rightCols(q) = pio.C2.transpose();
  Matrix side(n, has_b2 ? 2 * p : p);
  side.leftCols(p) = pio.B1;
  if (has_b2) side.rightCols(p) = pio.B2;

  H2Result out;
  out.seed = has_c2 ? "[C1^T, C2^T]" : "C1^T";
  out.warnings = detail::stability_warnings(a);
  if (detail::is_zero(seed) || detail::is_zero(side)) {
    out.converged = true;
    out.termination = Termination::converged;
    out.history.push_back(0.0);
    return out;
  }

  // Per node: middle block [[I, c], [c^T, c^T c]] and B_m(mu) coefficients.
  std::vector<Matrix> middles, bcoef;
  for (double mu : pio.nodes) {
    Matrix mid = Matrix::Identity(seed.cols(), seed.cols());
    if (has_c2) {
      const Matrix c = pio.c(mu);
      if (c.rows() != q || c.cols() != q) throw DimensionError("h2_param_norm: c(mu) must be q x q");
      mid.topRightCorner(q, q) = c;
      mid.bottomLeftCorner(q, q) = c.transpose();
      mid.bottomRightCorner(q, q) = c.transpose() * c;
    }
    middles.push_back(mid);
    Matrix coef(side.cols(), p);
    coef.topRows(p).setIdentity();
    if (has_b2) {
      const Matrix b = pio.b(mu);
      if (b.rows() != p || b.cols() != p) throw DimensionError("h2_param_norm: b(mu) must be p x p");
      coef.bottomRows(p) = b;
    }
    bcoef.push_back(coef);
  }

  const ShiftSequence shifts = detail::resolve_shifts(a, shifts_in);
  const Index max_m = detail::effective_max(shifts, opts.max_m);
  ShiftedSolverCache solver(a, opts.solver);
  return detail::with_block_engine(a, seed, side, solver, opts, [&](auto& eng) {
    const Matrix gamma = eng.start_factor();
    for (Index j = 1; j <= max_m; ++j) {
      const bool more = eng.step(shifts.at(j));
      const Matrix jm = eng.projected();
      const Matrix s = eng.side_projection();
      double total = 0.0;
      for (std::size_t i = 0; i < pio.nodes.size(); ++i) {
        const Matrix y = lyap_sym(jm, detail::seed_gramian_rhs(jm.rows(), gamma, middles[i]));
        const Matrix bm = s * bcoef[i];
        total += pio.weights[i] * (bm.transpose() * y * bm).trace();
      }
      const double nrm = std::sqrt(std::max(0.0, total));
      out.history.push_back(nrm);
      out.iterations = j;
      out.norm = nrm;
      out.J = jm;
      out.side = s;
      double change = std::numeric_limits<double>::quiet_NaN();
      if (j > opts.lag) {
        const double prev = out.history[static_cast<std::size_t>(j - 1 - opts.lag)];
        change = nrm > 0.0 ? std::abs(nrm - prev) / nrm : std::abs(nrm - prev);
      }
      out.change_history.push_back(change);
      if (change <= opts.tol) {
        out.converged = true;
        out.termination = Termination::converged;
        break;
      }
      if (!more) {
        out.termination = eng.termination();
        out.converged = out.termination == Termination::lucky_breakdown;
        break;
      }
    }
    if (opts.retain_basis || opts.method == Method::arnoldi) out.basis = eng.basis();
    return out;
  });
}

/// u_m(t) = Rinv B_m^T Y_m exp((J_m - B_m Rinv B_m^T Y_m) t) z0.
inline Vector eval_control(const ReducedController& ctrl, double t) {
  if (t < 0.0) throw InvalidArgument("eval_control: t must be nonnegative");
  if (ctrl.m == 0) return Vector::Zero(ctrl.inputs());
  return ctrl.gain * (expm_general(ctrl.closed * t) * ctrl.z0);
}

/// Largest real part of the closed-loop spectrum.
inline double closed_loop_abscissa(const ReducedController& ctrl) {
  if (ctrl.m == 0 || ctrl.closed.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(ctrl.closed, false);
  return es.eigenvalues().real().maxCoeff();
}

namespace detail {

/// u(t) = sum_i coeff.col(i) exp(lambda_i t) from an eigendecomposition of the
/// closed loop; empty when the eigenvector matrix is too ill-conditioned.
struct ModalControl {
  Eigen::VectorXcd lambda;
  Eigen::MatrixXcd coeff;
};

inline std::optional<ModalControl> modal_control(const ReducedController& c) {
  if (c.m == 0 || c.closed.size() == 0) return std::nullopt;
  Eigen::EigenSolver<Matrix> es(c.closed);
  if (es.info() != Eigen::Success) return std::nullopt;
  const Eigen::MatrixXcd v = es.eigenvectors();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(v);
  if (!(lu.rcond() > 1e-10)) return std::nullopt;
  const Eigen::VectorXcd a = lu.solve(c.z0.cast<std::complex<double>>());
  ModalControl out;
  out.lambda = es.eigenvalues();
  out.coeff = (c.gain.cast<std::complex<double>>() * v) * a.asDiagonal();
  return out;
}

inline Vector control_value(const ReducedController& c, const std::optional<ModalControl>& mc, double t) {
  if (c.m == 0) return Vector::Zero(c.inputs());
  if (!mc) return c.gain * (expm_general(c.closed * t) * c.z0);
  const Eigen::VectorXcd e = (mc->lambda * t).array().exp().matrix();
  return (mc->coeff * e).real();
}

/// Rate bounds (min decay rate, max modulus) of a closed-loop spectrum.
inline void spectral_rates(const ReducedController& c, double& slow, double& fast) {
  if (c.m == 0 || c.closed.size() == 0) return;
  Eigen::EigenSolver<Matrix> es(c.closed, false);
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const std::complex<double> l = es.eigenvalues()(i);
    if (!(l.real() < 0.0)) throw InstabilityError("l2_stop_metric: closed loop is not stable");
    slow = std::min(slow, -l.real());
    fast = std::max(fast, std::abs(l));
  }
}

/// Step of the trapezoid rule in s = log t for the L2 distance.
inline constexpr double kL2LogStep = 0.05;

/// int_0^inf ||u_a(t) - u_b(t)||^2 dt by the trapezoid rule in s = log t on
/// [1e-8 / fast, 60 / slow] plus the rectangle [0, 1e-8 / fast]. The
/// difference is formed pointwise, so agreement of the controllers does not
/// cancel in the integral.
inline double l2_distance_squared(const ReducedController& a, const ReducedController& b) {
  double slow = std::numeric_limits<double>::infinity(), fast = 0.0;
  spectral_rates(a, slow, fast);
  spectral_rates(b, slow, fast);
  if (fast == 0.0) return 0.0;
  const auto ma = modal_control(a);
  const auto mb = modal_control(b);
  auto g = [&](double t) { return (control_value(a, ma, t) - control_value(b, mb, t)).squaredNorm(); };
  const double t_lo = 1e-8 / fast;
  const double s_lo = std::log(t_lo), s_hi = std::log(60.0 / slow);
  const auto steps = static_cast<Index>(std::ceil((s_hi - s_lo) / kL2LogStep));
  const double h = (s_hi - s_lo) / static_cast<double>(steps);
  double sum = g(0.0) * t_lo;
  for (Index k = 0; k <= steps; ++k) {
    const double t = std::exp(s_lo + h * static_cast<double>(k));
    const double w = k == 0 || k == steps ? 0.5 * h : h;
    sum += w * t * g(t);
  }
  return sum;
}

}  // namespace detail

/// ||u_m||^2_{L2} on [0, inf) from the Lyapunov equation of the closed loop.
inline double l2_norm_squared(const ReducedController& c) {
  if (c.m == 0 || c.closed.size() == 0) return 0.0;
  const Matrix x = lyap_general(c.closed, c.gain.transpose() * c.gain);
  return c.z0.dot(x * c.z0);
}

/// ||u_m - u_prev||^2_{L2} / ||u_m||^2_{L2} on [0, inf). The denominator is
/// the closed-form Lyapunov integral; the numerator integrates the pointwise
/// difference with an exponentially convergent quadrature in log t.
inline double l2_stop_metric(const ReducedController& um, const ReducedController& up) {
  const double den = l2_norm_squared(um);
  const double num = detail::l2_distance_squared(um, up);
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

/// Variant of l2_stop_metric with the numerator from the Lyapunov equation of
/// the stacked closed loop (exact, but subject to cancellation).
inline double l2_stop_metric_lyapunov(const ReducedController& um, const ReducedController& up) {
  const Index p = um.inputs();
  auto gram = [](const Matrix& m, const Matrix& k, const Vector& z) {
    if (m.size() == 0) return 0.0;
    const Matrix x = lyap_general(m, k.transpose() * k);
    return z.dot(x * z);
  };
  const double den = um.m == 0 ? 0.0 : gram(um.closed, um.gain, um.z0);
  const Index km = um.m == 0 ? 0 : um.closed.rows();
  const Index kp = up.m == 0 ? 0 : up.closed.rows();
  Matrix big = Matrix::Zero(km + kp, km + kp);
  Matrix gain(p, km + kp);
  Vector z(km + kp);
  if (km > 0) {
    big.topLeftCorner(km, km) = um.closed;
    gain.leftCols(km) = um.gain;
    z.head(km) = um.z0;
  }
  if (kp > 0) {
    big.bottomRightCorner(kp, kp) = up.closed;
    gain.rightCols(kp) = -up.gain;
    z.tail(kp) = up.z0;
  }
  const double num = km + kp == 0 ? 0.0 : std::max(0.0, gram(big, gain, z));
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

/// Reduced LQR on the block rational Krylov space of C^T with the L2 stopping
/// metric of lag s.
inline LqrResult lqr_reduce(const LtiSystem& sys_in, const ShiftSequence& shifts_in,
                            const ControlOptions& opts = {}) {
  opts.validate();
  const LtiSystem sys = mass_transform(sys_in);
  const Index n = sys.n();
  const Index p = sys.inputs();
  const Matrix rinv = sys.r_inverse();
  const Vector x0 = sys.x0.size() == 0 ? Vector::Zero(n) : sys.x0;
  LqrResult out;
  out.warnings = detail::stability_warnings(sys.A);
  out.controller.Rinv = rinv;
  const Matrix seed = sys.C.transpose();
  if (detail::is_zero(seed)) {
    out.converged = true;
    out.termination = Termination::converged;
    return out;
  }
  Matrix side(n, p + 1);
  side.leftCols(p) = sys.B;
  side.col(p) = x0;
  const ShiftSequence shifts = detail::resolve_shifts(sys.A, shifts_in);
  const Index max_m = detail::effective_max(shifts, opts.max_m);
  ShiftedSolverCache solver(sys.A, opts.solver);
  return detail::with_block_engine(sys.A, seed, side, solver, opts, [&](auto& eng) {
    const Matrix gamma = eng.start_factor();
    const Matrix eye = Matrix::Identity(gamma.rows(), gamma.rows());
    std::vector<ReducedController> ring;
    for (Index j = 1; j <= max_m; ++j) {
      const bool more = eng.step(shifts.at(j));
      ReducedController c;
      c.m = j;
      c.J = eng.projected();
      const Matrix s = eng.side_projection();
      c.B_m = s.leftCols(p);
      c.z0 = s.col(p);
      c.Rinv = rinv;
      c.Y = care_newton(c.J, c.B_m, rinv, detail::seed_gramian_rhs(c.J.rows(), gamma, eye), opts.care);
      c.gain = rinv * c.B_m.transpose() * c.Y;
      c.closed = c.J - c.B_m * c.gain;
      ring.push_back(c);
      out.controller = c;
      out.iterations = j;
      double metric = std::numeric_limits<double>::quiet_NaN();
      if (j > opts.lag) metric = l2_stop_metric(c, ring[static_cast<std::size_t>(j - 1 - opts.lag)]);
      out.metric_history.push_back(metric);
      if (metric <= opts.tol) {
        out.converged = true;
        out.termination = Termination::converged;
        break;
      }
      if (!more) {
        out.termination = eng.termination();
        out.converged = out.termination == Termination::lucky_breakdown;
        break;
      }
    }
    if (opts.retain_basis || opts.method == Method::arnoldi) out.basis = eng.basis();
    return out;
  });
}

}  // namespace ratlanczos
