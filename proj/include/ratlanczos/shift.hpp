#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "ratlanczos/errors.hpp"

namespace ratlanczos {

/// A pole of the rational Krylov space: a finite nonzero real or infinity.
/// An infinite pole turns a step into a polynomial (multiplication) step.
class Shift {
 public:
  constexpr Shift() = default;

  explicit Shift(double value) : value_(value) {
    if (value == 0.0 || std::isnan(value)) {
      throw InvalidArgument("shift must be nonzero and not NaN");
    }
    if (std::isinf(value)) value_ = kInf;
  }

  static constexpr Shift infinity() { return Shift{}; }

  constexpr bool is_infinite() const { return value_ == kInf; }
  constexpr double value() const { return value_; }
  /// 1/xi with 1/inf == 0 exactly.
  constexpr double inverse() const { return is_infinite() ? 0.0 : 1.0 / value_; }

  friend constexpr bool operator==(Shift a, Shift b) { return a.value_ == b.value_; }

  std::string to_string() const {
    return is_infinite() ? std::string("inf") : std::to_string(value_);
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  double value_ = kInf;
};

}  // namespace ratlanczos
