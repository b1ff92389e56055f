#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

// Caller broke a documented precondition (bad dimensions, non-orthonormal
// rotation, empty cloud, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad user-supplied configuration: unknown scenario, malformed config file,
// out-of-range parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A received bitstream cannot be parsed at all (e.g. truncated).
class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientObservations : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semcom
