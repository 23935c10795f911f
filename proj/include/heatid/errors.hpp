#pragma once

#include <stdexcept>
#include <string>

namespace heatid {

/// Malformed input: bad sizes, ranges, grid mismatch.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Coefficients or parameters outside the admissible set.
class AdmissibilityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Linear solver or iteration failure.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace heatid
