#pragma once

#include <stdexcept>
#include <string>

namespace pnp {

// Operand shapes disagree (tensor sizes, channel counts, mask grids).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the domain of a function (negative Poisson intensity,
// non-positive step size, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An iterative routine failed to converge or produced a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pnp
