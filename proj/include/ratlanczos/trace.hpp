#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

#include "ratlanczos/forms.hpp"

namespace ratlanczos {

struct TraceRequest {
  ScalarFunction f = ScalarFunction::log();
  Index num_probes = 1;  // number of probe groups
  Index block = 1;       // probes per group, run as one block
  std::uint64_t seed = 0;
  ShiftSequence shifts;  // empty selects default_shifts
  double tol = 1e-10;
  Index lag = 1;
  Index max_m = 50;
  Method method = Method::qless_lanczos;
  SolverMethod solver = SolverMethod::automatic;
  unsigned threads = 1;

  FormRequest form() const {
    FormRequest r;
    r.f = f;
    r.tol = tol;
    r.lag = lag;
    r.max_m = max_m;
    r.method = method;
    r.solver = solver;
    return r;
  }
};

struct TraceResult {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::vector<double> samples;       // z^T f(A) z per probe, in probe order
  std::vector<double> group_values;  // trace of each group's block form
  std::vector<double> history;       // estimate after j iterations of every group
  std::vector<Index> iterations;     // per group
  std::vector<Termination> terminations;
  bool converged = true;
};

/// Rademacher probe with global index k: entries +-1 from a generator keyed by
/// (seed, k), so any probe can be regenerated independently.
inline Vector rademacher_probe(Index n, std::uint64_t seed, std::uint64_t k) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  std::mt19937_64 gen(seq);
  Vector z(n);
  for (Index i = 0; i < n; ++i) z(i) = (gen() >> 63) ? 1.0 : -1.0;
  return z;
}

inline Matrix rademacher_block(Index n, Index p, std::uint64_t seed, std::uint64_t first) {
  Matrix z(n, p);
  for (Index i = 0; i < p; ++i) z.col(i) = rademacher_probe(n, seed, first + static_cast<std::uint64_t>(i));
  return z;
}

namespace detail {

struct GroupOutcome {
  FormResult form;
  std::exception_ptr error;
};

inline TraceResult summarize_trace(const std::vector<GroupOutcome>& groups, Index total_probes) {
  TraceResult out;
  std::size_t longest = 0;
  for (const GroupOutcome& g : groups) {
    if (g.error) std::rethrow_exception(g.error);
    const Matrix& b = g.form.block_value;
    for (Index i = 0; i < b.rows(); ++i) out.samples.push_back(b(i, i));
    out.group_values.push_back(b.trace());
    out.iterations.push_back(g.form.iterations);
    out.terminations.push_back(g.form.termination);
    out.converged = out.converged && g.form.converged;
    longest = std::max(longest, g.form.history.size());
  }
  const double count = static_cast<double>(total_probes);
  out.history.assign(longest, 0.0);
  for (const GroupOutcome& g : groups) {
    for (std::size_t j = 0; j < longest; ++j) {
      out.history[j] += g.form.history[std::min(j, g.form.history.size() - 1)] / count;
    }
  }
  double sum = 0.0;
  for (double s : out.samples) sum += s;
  out.estimate = sum / count;
  if (out.samples.size() > 1) {
    double ss = 0.0;
    for (double s : out.samples) ss += (s - out.estimate) * (s - out.estimate);
    out.stderr_ = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
  }
  return out;
}

template <class Task>
void run_groups(std::size_t count, unsigned threads, Task task) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t g = 0; g < count; ++g) task(g);
    return;
  }
  std::vector<std::thread> pool;
  const unsigned used = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  for (unsigned t = 0; t < used; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t g = t; g < count; g += used) task(g);
    });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace detail

/// Hutchinson estimate of tr f(A) from the columns of `probes`, processed in
/// consecutive blocks of req.block columns.
inline TraceResult hutchinson_trace(const SparseSym& a, const Matrix& probes, const TraceRequest& req) {
  if (probes.rows() != a.size()) throw DimensionError("hutchinson_trace: probe length mismatch");
  if (req.block < 1) throw InvalidArgument("hutchinson_trace: block size must be >= 1");
  if (probes.cols() == 0) throw InvalidArgument("hutchinson_trace: no probes");
  const Index p = req.block;
  const auto groups = static_cast<std::size_t>((probes.cols() + p - 1) / p);
  const FormRequest form = req.form();
  const ShiftSequence shifts = req.shifts.empty() ? default_shifts(a) : req.shifts;
  ShiftedSolverCache solver(a, req.solver);
  std::vector<detail::GroupOutcome> out(groups);
  detail::run_groups(groups, req.threads, [&](std::size_t g) {
    try {
      const Index c0 = static_cast<Index>(g) * p;
      const Index w = std::min(p, probes.cols() - c0);
      out[g].form = block_quad_form(a, probes.middleCols(c0, w), shifts, form, solver);
    } catch (...) {
      out[g].error = std::current_exception();
    }
  });
  return detail::summarize_trace(out, probes.cols());
}

/// Hutchinson estimate with req.num_probes groups of req.block seeded
/// Rademacher probes.
inline TraceResult hutchinson_trace(const SparseSym& a, const TraceRequest& req) {
  if (req.num_probes < 1 || req.block < 1) {
    throw InvalidArgument("hutchinson_trace: need at least one probe group of size >= 1");
  }
  const Matrix probes = rademacher_block(a.size(), req.num_probes * req.block, req.seed, 0);
  return hutchinson_trace(a, probes, req);
}

inline TraceResult logdet(const SparseSym& a, TraceRequest req) {
  req.f = ScalarFunction::log();
  return hutchinson_trace(a, req);
}

/// log p(x | phi) = 1/2 log det A - 1/2 x^T A x - n/2 log(2 pi), A the
/// precision matrix.
inline double log_likelihood(const SparseSym& a, const Vector& x, double logdet_value) {
  if (x.size() != a.size()) throw DimensionError("log_likelihood: x has wrong length");
  const double n = static_cast<double>(a.size());
  return 0.5 * logdet_value - 0.5 * x.dot(spmv(a, x)) - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

using Point2 = std::array<double, 2>;

/// Precision matrix of the reciprocal-choice neighbourhood model:
/// gamma_ij = 1 - d_ij / delta for 0 < d_ij < delta, A_ii = 1 + phi sum_k gamma_ik,
/// A_ij = -phi gamma_ij.
inline SparseSym gp_precision_matrix(const std::vector<Point2>& points, double phi, double delta) {
  if (!(phi > 0.0) || !(delta > 0.0)) throw InvalidArgument("gp_precision_matrix: phi and delta must be positive");
  const auto n = static_cast<Index>(points.size());
  std::vector<Triplet> trip;
  std::vector<double> diag(points.size(), 1.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t k = i + 1; k < points.size(); ++k) {
      const double d = std::hypot(points[i][0] - points[k][0], points[i][1] - points[k][1]);
      if (d > 0.0 && d < delta) {
        const double g = 1.0 - d / delta;
        trip.emplace_back(static_cast<int>(i), static_cast<int>(k), -phi * g);
        trip.emplace_back(static_cast<int>(k), static_cast<int>(i), -phi * g);
        diag[i] += phi * g;
        diag[k] += phi * g;
      }
    }
  }
  for (std::size_t i = 0; i < points.size(); ++i)
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), diag[i]);
  return SparseSym::from_triplets(n, trip, Definiteness::positive);
}

}  // namespace ratlanczos
