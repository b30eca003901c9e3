#ifndef CUBATLAS_ERRORS_HPP_
#define CUBATLAS_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cubatlas {

// Argument outside the domain of a function (group number, density, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Internal tables or inputs that violate invariants which cannot happen
// with correct data.
struct DataCorruptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  enum class Kind { Open, BadMagic, Version, Truncated, Format };
  IoError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace cubatlas

#endif
