#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cconv {

enum class ErrorKind {
  DegenerateHessian,
  DiagonalSingularity,
  StencilOutOfDomain,
  NoConvergence,
  TargetOutsideImage,
  NoFeasibleRadius,
  AllMinusInfinity,
  TouchingNotFound,
  NoViolationFound,
  RefinementFailed,
  TiltOutOfDomain,
  CapEmpty,
  ConfigError,
  IoError,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (and the
/// CLI exit-status mapping) can tell meaningful negative findings from bugs.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cconv
