#pragma once

#include <stdexcept>
#include <string>

namespace condmoments {

// A parameter or input falls outside the domain where the quantity is defined.
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// Operands of incompatible shape (matrix sizes, polynomial spaces).
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// An iterative numerical method did not converge or failed its own residual check.
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what) : std::runtime_error(what) {}
};

// A configuration file or command line that cannot be run as written.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace condmoments
