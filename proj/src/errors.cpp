#include "cconv/errors.hpp"

namespace cconv {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateHessian: return "DegenerateHessian";
    case ErrorKind::DiagonalSingularity: return "DiagonalSingularity";
    case ErrorKind::StencilOutOfDomain: return "StencilOutOfDomain";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::TargetOutsideImage: return "TargetOutsideImage";
    case ErrorKind::NoFeasibleRadius: return "NoFeasibleRadius";
    case ErrorKind::AllMinusInfinity: return "AllMinusInfinity";
    case ErrorKind::TouchingNotFound: return "TouchingNotFound";
    case ErrorKind::NoViolationFound: return "NoViolationFound";
    case ErrorKind::RefinementFailed: return "RefinementFailed";
    case ErrorKind::TiltOutOfDomain: return "TiltOutOfDomain";
    case ErrorKind::CapEmpty: return "CapEmpty";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace cconv
