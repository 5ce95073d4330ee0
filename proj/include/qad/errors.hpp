#pragma once

#include <stdexcept>
#include <string>

namespace qad {

/// Inputs or configuration that violate a documented precondition.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation that ran but failed its own convergence or integrity check.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace qad
