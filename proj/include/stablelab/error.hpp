#pragma once

#include <stdexcept>
#include <string>

namespace stablelab {

/// Precondition violated by caller-supplied data (bad parameters, malformed
/// config, refused theorem boundary). Maps to CLI exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver a result (solver failed to
/// bracket, iteration cap, quadrature did not converge).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Orbit-level failure in the billiard (grazing collision, cusp depth below
/// representable precision). Callers discard the orbit and count it.
class OrbitAborted : public std::runtime_error {
 public:
  enum class Reason { grazing, precision_exhausted, no_intersection, iteration_cap };

  OrbitAborted(Reason reason, const std::string& what)
      : std::runtime_error(what), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

}  // namespace stablelab
