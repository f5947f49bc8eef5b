#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ratlanczos/shift.hpp"
#include "ratlanczos/sparse_sym.hpp"

namespace ratlanczos {

/// Ordered poles xi_1, xi_2, ... consumed one per iteration. Iteration j uses
/// at(j); a cyclic sequence wraps around. The conceptual prefix
/// xi_{-1} = xi_0 = inf is handled by the recurrences, not stored here.
class ShiftSequence {
 public:
  ShiftSequence() = default;
  explicit ShiftSequence(std::vector<Shift> poles, bool cyclic = false)
      : poles_(std::move(poles)), cyclic_(cyclic) {}

  static ShiftSequence from_values(const std::vector<double>& values, bool cyclic = false) {
    std::vector<Shift> p;
    p.reserve(values.size());
    for (double v : values) p.emplace_back(v);
    return ShiftSequence(std::move(p), cyclic);
  }

  static ShiftSequence all_infinite(std::size_t count) {
    return ShiftSequence(std::vector<Shift>(count, Shift::infinity()));
  }

  bool empty() const { return poles_.empty(); }
  bool cyclic() const { return cyclic_; }
  std::size_t size() const { return poles_.size(); }
  const std::vector<Shift>& poles() const { return poles_; }

  /// Whether at(j) is defined for j = 1..m.
  bool covers(Index m) const {
    return !poles_.empty() && (cyclic_ || static_cast<Index>(poles_.size()) >= m);
  }

  /// 1-based access.
  Shift at(Index j) const {
    if (poles_.empty()) throw InvalidArgument("ShiftSequence: empty shift list");
    if (j < 1) throw InvalidArgument("ShiftSequence: index must be >= 1");
    const auto k = static_cast<std::size_t>(j - 1);
    if (cyclic_) return poles_[k % poles_.size()];
    if (k >= poles_.size()) {
      throw InvalidArgument("ShiftSequence: iteration " + std::to_string(j) +
                            " exceeds the " + std::to_string(poles_.size()) + " given shifts");
    }
    return poles_[k];
  }

 private:
  std::vector<Shift> poles_;
  bool cyclic_ = false;
};

struct NormEstimate {
  double norm = 0.0;            // inflated estimate of ||A||_2
  double dominant_rayleigh = 0;  // sign reveals definiteness of a definite A
};

/// Power iteration with a fixed pseudo-random start, inflated by `inflation`.
inline NormEstimate estimate_norm(const SparseSym& a, int steps = 20, double inflation = 1.05) {
  const Index n = a.size();
  if (n == 0) return {};
  std::mt19937_64 gen(0x5eed5eedULL);
  Vector x(n);
  for (Index i = 0; i < n; ++i) x(i) = static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5;
  x.normalize();
  double lambda = 0.0;
  double rq = 0.0;
  for (int k = 0; k < steps; ++k) {
    Vector y = spmv(a, x);
    rq = x.dot(y);
    lambda = y.norm();
    if (lambda == 0.0) break;
    x = y / lambda;
  }
  return {inflation * lambda, rq};
}

/// Sign a finite pole must carry so that I - A/xi is positive definite.
inline double admissible_pole_sign(const SparseSym& a, const NormEstimate& est) {
  switch (a.definiteness_hint()) {
    case Definiteness::positive: return -1.0;
    case Definiteness::negative: return 1.0;
    default: return est.dominant_rayleigh > 0.0 ? -1.0 : 1.0;
  }
}

inline constexpr int kDefaultShiftCount = 12;
inline constexpr double kDefaultShiftSpan = 1e6;

/// Default pole sequence: `count` logarithmically spaced magnitudes in
/// [||A||/span, ||A||], signed opposite to the spectrum of A and cycled. The
/// order interleaves the range (bit-reversed) so that the first few poles
/// already cover it.
inline ShiftSequence default_shifts(const SparseSym& a, int count = kDefaultShiftCount,
                                    double span = kDefaultShiftSpan) {
  const NormEstimate est = estimate_norm(a);
  const double top = est.norm > 0.0 ? est.norm : 1.0;
  const double sign = admissible_pole_sign(a, est);
  std::vector<double> mags(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    mags[static_cast<std::size_t>(i)] = top * std::pow(span, -frac);
  }
  std::vector<std::size_t> order;
  int bits = 0;
  while ((1 << bits) < count) ++bits;
  for (int k = 0; k < (1 << bits); ++k) {
    int r = 0;
    for (int b = 0; b < bits; ++b)
      if (k & (1 << b)) r |= 1 << (bits - 1 - b);
    if (r < count) order.push_back(static_cast<std::size_t>(r));
  }
  std::vector<Shift> poles;
  for (std::size_t idx : order) poles.emplace_back(sign * mags[idx]);
  return ShiftSequence(std::move(poles), true);
}

/// Human-readable warnings for finite poles whose sign matches a definite A.
inline std::vector<std::string> validate_shifts(const SparseSym& a, const ShiftSequence& shifts) {
  std::vector<std::string> warnings;
  const Definiteness d = a.definiteness_hint();
  if (d != Definiteness::positive && d != Definiteness::negative) return warnings;
  const double bad_sign = d == Definiteness::positive ? 1.0 : -1.0;
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    const Shift s = shifts.poles()[i];
    if (!s.is_infinite() && s.value() * bad_sign > 0.0) {
      warnings.push_back("shift " + std::to_string(i + 1) + " = " + s.to_string() +
                         " has the same sign as the spectrum of A");
    }
  }
  return warnings;
}

}  // namespace ratlanczos
