#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pmsmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;
using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;

enum class ErrorCode {
  AllZeroWeights,
  NonFiniteWeight,
  BadTimes,
  RejectionBudgetExceeded,
  DegenerateDiffusion,
  WaldBudgetExceeded,
  ZeroNormalizer,
  InvalidBound,
  ZeroLikelihood,
  NonFiniteGradient,
  SingularCovariance,
  DomainError,
  PositivityViolation,
  DimensionMismatch,
  InvalidArgument,
  IoError,
  ConfigError,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a code so callers (the CLI in
// particular) can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Budget and numerical failures, as opposed to bad input.
  bool is_numerical() const noexcept;

 private:
  ErrorCode code_;
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace pmsmc
