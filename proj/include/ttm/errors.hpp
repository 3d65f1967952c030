#pragma once

#include <stdexcept>
#include <string>

namespace ttm {

// Operand shapes do not fit (vector length, non-square, non-factorizable).
struct SizeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain (t < s, dt <= 0, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Input fails a physical validity check (non-Hermitian H, negative rate, ...).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Missing or inconsistent optional argument.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A stored table (map family, tensor set) lacks a required entry.
struct CoverageError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Numerical failure during a computation, with stage context.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ttm
