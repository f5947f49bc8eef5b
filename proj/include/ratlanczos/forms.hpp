#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "ratlanczos/block_rational_lanczos.hpp"
#include "ratlanczos/dense.hpp"
#include "ratlanczos/rational_arnoldi.hpp"
#include "ratlanczos/rational_lanczos.hpp"
#include "ratlanczos/shifted_solver.hpp"
#include "ratlanczos/shifts.hpp"

namespace ratlanczos {

enum class FormStrategy { quadratic, polarization, oblique, block2x2 };
enum class StoppingRule { iterate_difference, residual_bound, both };
enum class Method { qless_lanczos, arnoldi };

inline const char* to_string(FormStrategy s) {
  switch (s) {
    case FormStrategy::quadratic: return "quadratic";
    case FormStrategy::polarization: return "polarization";
    case FormStrategy::oblique: return "oblique";
    case FormStrategy::block2x2: return "block2x2";
  }
  return "unknown";
}

inline const char* to_string(StoppingRule s) {
  switch (s) {
    case StoppingRule::iterate_difference: return "iterate-difference";
    case StoppingRule::residual_bound: return "residual-bound";
    case StoppingRule::both: return "both";
  }
  return "unknown";
}

inline const char* to_string(Method m) {
  return m == Method::qless_lanczos ? "qless-lanczos" : "rational-arnoldi";
}

inline FormStrategy form_strategy_from_string(const std::string& s) {
  if (s == "quadratic") return FormStrategy::quadratic;
  if (s == "polarization") return FormStrategy::polarization;
  if (s == "oblique") return FormStrategy::oblique;
  if (s == "block2x2") return FormStrategy::block2x2;
  throw InvalidArgument("unknown strategy '" + s + "'");
}

inline StoppingRule stopping_rule_from_string(const std::string& s) {
  if (s == "iterate-difference") return StoppingRule::iterate_difference;
  if (s == "residual-bound") return StoppingRule::residual_bound;
  if (s == "both") return StoppingRule::both;
  throw InvalidArgument("unknown stopping rule '" + s + "'");
}

inline Method method_from_string(const std::string& s) {
  if (s == "qless-lanczos" || s == "lanczos") return Method::qless_lanczos;
  if (s == "rational-arnoldi" || s == "arnoldi") return Method::arnoldi;
  throw InvalidArgument("unknown method '" + s + "'");
}

struct FormRequest {
  ScalarFunction f = ScalarFunction::exp();
  FormStrategy strategy = FormStrategy::quadratic;
  double tol = 1e-10;
  Index lag = 1;
  Index max_m = 50;
  StoppingRule stopping = StoppingRule::iterate_difference;
  Method method = Method::qless_lanczos;
  SolverMethod solver = SolverMethod::automatic;

  void validate() const {
    if (!(tol > 0.0)) throw InvalidArgument("form request: tol must be positive");
    if (lag < 1 || lag >= max_m) throw InvalidArgument("form request: need 1 <= s < max_m");
  }
};

struct FormResult {
  double value = 0.0;
  Matrix block_value;                 // p x p for block forms, 1 x 1 otherwise
  std::vector<double> history;        // value after each iteration
  std::vector<double> bound_history;  // residual bound after each iteration
  Index iterations = 0;
  bool converged = false;
  Termination termination = Termination::max_iterations;
  double norm_estimate = 0.0;
};

/// ||r_m|| <= ||v|| |beta_m| (1 + |1/xi_m| ||A||) |t_m^T f(tau J_m) e_1|.
inline double residual_bound(const RationalLanczos& lz, const ScalarFunction& f, double tau,
                             double a_norm) {
  if (lz.iterations() == 0) return 0.0;
  const Matrix fj = dense_matfun(tau * lz.projected(), f);
  const double b = lz.last_beta_norm();
  return lz.state().v_norm * b * (1.0 + std::abs(lz.last_shift().inverse()) * a_norm) *
         std::abs(lz.state().t.dot(fj.col(0)));
}

/// Block bound ||beta_m||_2 (1 + |1/xi_m| ||A||) ||T_m^T f(tau J_m) E_1 R||_F.
inline double residual_bound(const BlockRationalLanczos& lz, const ScalarFunction& f, double tau,
                             double a_norm) {
  if (lz.iterations() == 0) return 0.0;
  const Index p = lz.block_size();
  const Matrix fj = dense_matfun(tau * lz.projected(), f);
  return lz.last_beta_norm() * (1.0 + std::abs(lz.last_shift().inverse()) * a_norm) *
         (lz.last_block_t().transpose() * fj.leftCols(p) * lz.start_factor()).norm();
}

/// Actual residual ||A Q_m g - Q_m J_m g|| with g = f(tau J_m) E_1 R, from a
/// retained basis.
inline double true_residual(const SparseSym& a, const Matrix& q, const Matrix& j,
                            const Matrix& start_factor, const ScalarFunction& f, double tau) {
  const Index k = j.rows();
  const Index p = start_factor.rows();
  const Matrix g = dense_matfun(tau * j, f).leftCols(p) * start_factor;
  const Matrix qk = q.leftCols(k);
  return (spmm(a, qk * g) - qk * (j * g)).norm();
}

namespace detail {

struct StepEval {
  Matrix value;
  double scalar = 0.0;  // reported in the history
  double bound = 0.0;
  double scale = 0.0;  // magnitude the bound is compared against
};

/// Engine-specific bound: the cheap estimate for the Q-less engines and the
/// actual residual for Arnoldi, which keeps its basis anyway.
template <class Engine>
double engine_bound(const Engine& eng, const Matrix& fj, double a_norm) {
  const Index p = eng.block_size();
  if constexpr (std::is_same_v<Engine, RationalArnoldi>) {
    return eng.residual_norm(fj.leftCols(p) * eng.start_factor());
  } else if constexpr (std::is_same_v<Engine, RationalLanczos>) {
    return eng.state().v_norm * eng.last_beta_norm() *
           (1.0 + std::abs(eng.last_shift().inverse()) * a_norm) *
           std::abs(eng.state().t.dot(fj.col(0)));
  } else {
    return eng.last_beta_norm() * (1.0 + std::abs(eng.last_shift().inverse()) * a_norm) *
           (eng.last_block_t().transpose() * fj.leftCols(p) * eng.start_factor()).norm();
  }
}

inline Index effective_max(const ShiftSequence& shifts, Index max_m) {
  if (shifts.cyclic()) return max_m;
  return std::min<Index>(max_m, static_cast<Index>(shifts.size()));
}

template <class Engine, class Eval>
FormResult drive(Engine& eng, const ShiftSequence& shifts, const FormRequest& req, double a_norm,
                 Eval eval) {
  FormResult out;
  out.norm_estimate = a_norm;
  std::vector<Matrix> values;
  const Index max_m = effective_max(shifts, req.max_m);
  for (Index j = 1; j <= max_m; ++j) {
    const bool more = eng.step(shifts.at(j));
    const Matrix fj = dense_matfun(eng.projected(), req.f);
    StepEval ev = eval(eng, fj);
    ev.bound = engine_bound(eng, fj, a_norm);
    values.push_back(ev.value);
    out.history.push_back(ev.scalar);
    out.bound_history.push_back(ev.bound);
    out.iterations = j;
    out.block_value = ev.value;
    bool diff_ok = false;
    if (j > req.lag) {
      const Matrix& old = values[static_cast<std::size_t>(j - 1 - req.lag)];
      diff_ok = (ev.value - old).norm() <= req.tol * ev.value.norm();
    }
    const bool bound_ok = ev.bound <= req.tol * ev.scale;
    bool stop = false;
    switch (req.stopping) {
      case StoppingRule::iterate_difference: stop = diff_ok; break;
      case StoppingRule::residual_bound: stop = bound_ok; break;
      case StoppingRule::both: stop = diff_ok && bound_ok; break;
    }
    if (stop) {
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
  out.value = out.history.back();
  return out;
}

inline ShiftSequence resolve_shifts(const SparseSym& a, const ShiftSequence& shifts) {
  return shifts.empty() ? default_shifts(a) : shifts;
}

/// Runs a single-vector form from v with optional side vector u.
inline FormResult vector_form(const SparseSym& a, const Vector& v, const Vector* u,
                              const ShiftSequence& shifts_in, const FormRequest& req,
                              ShiftedSolverCache& solver) {
  const ShiftSequence shifts = resolve_shifts(a, shifts_in);
  const double a_norm = estimate_norm(a).norm;
  const double vn = v.norm();
  auto eval = [&](const auto& eng, const Matrix& fj) {
    StepEval ev;
    ev.value = Matrix(1, 1);
    if (u == nullptr) {
      ev.value(0, 0) = vn * vn * fj(0, 0);
    } else {
      ev.value(0, 0) = vn * eng.side_projection().col(0).dot(fj.col(0));
    }
    ev.scalar = ev.value(0, 0);
    ev.scale = vn * fj.col(0).norm();
    return ev;
  };
  if (req.method == Method::arnoldi) {
    ArnoldiOptions opts;
    if (u != nullptr) opts.side_matrix = *u;
    RationalArnoldi eng(a, v, solver, opts);
    return drive(eng, shifts, req, a_norm, eval);
  }
  LanczosOptions opts;
  if (u != nullptr) opts.side_matrix = *u;
  RationalLanczos eng(a, v, solver, opts, req.max_m);
  return drive(eng, shifts, req, a_norm, eval);
}

/// R^T E_1^T f(J) E_1 R for the block started from V = Q_1 R.
template <class Scalar>
FormResult matrix_form(const SparseSym& a, const Matrix& v, const ShiftSequence& shifts_in,
                       const FormRequest& req, ShiftedSolverCache& solver, Scalar scalar_of) {
  const ShiftSequence shifts = resolve_shifts(a, shifts_in);
  const double a_norm = estimate_norm(a).norm;
  const Index p = v.cols();
  auto eval = [&](const auto& eng, const Matrix& fj) {
    StepEval ev;
    const Matrix r = eng.start_factor();
    ev.value = symmetrized(r.transpose() * fj.topLeftCorner(p, p) * r);
    ev.scalar = scalar_of(ev.value);
    ev.scale = (fj.leftCols(p) * r).norm();
    return ev;
  };
  if (req.method == Method::arnoldi) {
    RationalArnoldi eng(a, v, solver);
    return drive(eng, shifts, req, a_norm, eval);
  }
  BlockRationalLanczos eng(a, v, solver, {}, req.max_m);
  return drive(eng, shifts, req, a_norm, eval);
}

}  // namespace detail

/// v^T f(A) v.
inline FormResult quad_form(const SparseSym& a, const Vector& v, const ShiftSequence& shifts,
                            const FormRequest& req, ShiftedSolverCache& solver) {
  req.validate();
  return detail::vector_form(a, v, nullptr, shifts, req, solver);
}

inline FormResult quad_form(const SparseSym& a, const Vector& v, const ShiftSequence& shifts,
                            const FormRequest& req) {
  ShiftedSolverCache solver(a, req.solver);
  return quad_form(a, v, shifts, req, solver);
}

/// V^T f(A) V as block_value (symmetric p x p); value and history hold its trace.
inline FormResult block_quad_form(const SparseSym& a, const Matrix& v, const ShiftSequence& shifts,
                                  const FormRequest& req, ShiftedSolverCache& solver) {
  req.validate();
  return detail::matrix_form(a, v, shifts, req, solver, [](const Matrix& m) { return m.trace(); });
}

inline FormResult block_quad_form(const SparseSym& a, const Matrix& v, const ShiftSequence& shifts,
                                  const FormRequest& req) {
  ShiftedSolverCache solver(a, req.solver);
  return block_quad_form(a, v, shifts, req, solver);
}

/// u^T f(A) v by the strategy in req.strategy.
inline FormResult bilinear_form(const SparseSym& a, const Vector& u, const Vector& v,
                                const ShiftSequence& shifts, const FormRequest& req,
                                ShiftedSolverCache& solver) {
  req.validate();
  if (u.size() != a.size() || v.size() != a.size()) {
    throw DimensionError("bilinear_form: vector length differs from matrix size");
  }
  switch (req.strategy) {
    case FormStrategy::quadratic:
      if (u != v) throw InvalidArgument("bilinear_form: quadratic strategy needs u == v");
      return detail::vector_form(a, v, nullptr, shifts, req, solver);
    case FormStrategy::oblique:
      return detail::vector_form(a, v, &u, shifts, req, solver);
    case FormStrategy::polarization: {
      const Vector plus = u + v;
      const Vector minus = u - v;
      FormResult fp = detail::vector_form(a, plus, nullptr, shifts, req, solver);
      FormResult out = fp;
      if (minus.norm() == 0.0) {
        for (double& h : out.history) h *= 0.25;
        out.value *= 0.25;
        out.block_value *= 0.25;
        return out;
      }
      FormResult fm = detail::vector_form(a, minus, nullptr, shifts, req, solver);
      const std::size_t len = std::max(fp.history.size(), fm.history.size());
      out.history.assign(len, 0.0);
      out.bound_history.assign(len, 0.0);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t ip = std::min(i, fp.history.size() - 1);
        const std::size_t im = std::min(i, fm.history.size() - 1);
        out.history[i] = 0.25 * (fp.history[ip] - fm.history[im]);
        out.bound_history[i] = 0.25 * (fp.bound_history[ip] + fm.bound_history[im]);
      }
      out.value = 0.25 * (fp.value - fm.value);
      out.block_value = Matrix::Constant(1, 1, out.value);
      out.iterations = fp.iterations + fm.iterations;
      out.converged = fp.converged && fm.converged;
      out.termination = !fp.converged ? fp.termination : fm.termination;
      return out;
    }
    case FormStrategy::block2x2: {
      Matrix uv(a.size(), 2);
      uv.col(0) = u;
      uv.col(1) = v;
      if (qr_thin_unchecked(uv).rank < 2) {
        throw RankDeficiencyError(
            "bilinear_form: u and v are parallel; use the quadratic strategy on one of them", 1);
      }
      return detail::matrix_form(a, uv, shifts, req, solver,
                                 [](const Matrix& m) { return m(0, 1); });
    }
  }
  throw InvalidArgument("bilinear_form: unknown strategy");
}

inline FormResult bilinear_form(const SparseSym& a, const Vector& u, const Vector& v,
                                const ShiftSequence& shifts, const FormRequest& req) {
  ShiftedSolverCache solver(a, req.solver);
  return bilinear_form(a, u, v, shifts, req, solver);
}

}  // namespace ratlanczos
