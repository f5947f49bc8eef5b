#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ratlanczos {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// I - A/xi is not positive definite for the offending shift.
class IndefiniteShiftError : public Error {
 public:
  IndefiniteShiftError(const std::string& what, double shift)
      : Error(what), shift_(shift) {}
  double shift() const noexcept { return shift_; }

 private:
  double shift_;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, std::ptrdiff_t rank)
      : Error(what), rank_(rank) {}
  std::ptrdiff_t numerical_rank() const noexcept { return rank_; }

 private:
  std::ptrdiff_t rank_;
};

/// A scalar function was evaluated outside of its domain.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double point)
      : Error(what), point_(point) {}
  double point() const noexcept { return point_; }

 private:
  double point_;
};

class InstabilityError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class OverflowError : public Error {
 public:
  OverflowError(const std::string& what, double norm)
      : Error(what), norm_(norm) {}
  double norm() const noexcept { return norm_; }

 private:
  double norm_;
};

/// A recurrence pivot (s^T q, omega_j, Q^T S) vanished.
class SingularPivotError : public Error {
 public:
  SingularPivotError(const std::string& what, std::ptrdiff_t step)
      : Error(what), step_(step) {}
  std::ptrdiff_t step() const noexcept { return step_; }

 private:
  std::ptrdiff_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ratlanczos
