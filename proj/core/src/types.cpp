#include "pmsmc/types.hpp"

namespace pmsmc {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::AllZeroWeights: return "AllZeroWeights";
    case ErrorCode::NonFiniteWeight: return "NonFiniteWeight";
    case ErrorCode::BadTimes: return "BadTimes";
    case ErrorCode::RejectionBudgetExceeded: return "RejectionBudgetExceeded";
    case ErrorCode::DegenerateDiffusion: return "DegenerateDiffusion";
    case ErrorCode::WaldBudgetExceeded: return "WaldBudgetExceeded";
    case ErrorCode::ZeroNormalizer: return "ZeroNormalizer";
    case ErrorCode::InvalidBound: return "InvalidBound";
    case ErrorCode::ZeroLikelihood: return "ZeroLikelihood";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::PositivityViolation: return "PositivityViolation";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

bool Error::is_numerical() const noexcept {
  switch (code_) {
    case ErrorCode::AllZeroWeights:
    case ErrorCode::NonFiniteWeight:
    case ErrorCode::RejectionBudgetExceeded:
    case ErrorCode::DegenerateDiffusion:
    case ErrorCode::WaldBudgetExceeded:
    case ErrorCode::ZeroNormalizer:
    case ErrorCode::InvalidBound:
    case ErrorCode::ZeroLikelihood:
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::SingularCovariance:
    case ErrorCode::DomainError:
    case ErrorCode::PositivityViolation:
      return true;
    default:
      return false;
  }
}

}  // namespace pmsmc
