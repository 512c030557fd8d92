#include "pmsmc/gaussian.hpp"

namespace pmsmc {

double isotropic_normal_pdf(VectorRef r, double variance) {
  const double d = static_cast<double>(r.size());
  return std::exp(-0.5 * r.squaredNorm() / variance - d * (kLogSqrt2Pi + 0.5 * std::log(variance)));
}

GaussianDensity::GaussianDensity(Vector mean, const Matrix& covariance)
    : mean_(std::move(mean)), llt_(covariance) {
  if (covariance.rows() != mean_.size() || covariance.cols() != mean_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "covariance does not match mean dimension");
  }
  if (llt_.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularCovariance, "covariance is not positive definite");
  }
  lower_ = llt_.matrixL();
  const double log_det = 2.0 * lower_.diagonal().array().log().sum();
  if (!std::isfinite(log_det)) throw Error(ErrorCode::SingularCovariance, "covariance is singular");
  log_norm_ = -static_cast<double>(mean_.size()) * kLogSqrt2Pi - 0.5 * log_det;
}

double GaussianDensity::log_pdf(VectorRef x) const {
  const Vector z = llt_.matrixL().solve(x - mean_);
  return log_norm_ - 0.5 * z.squaredNorm();
}

Matrix GaussianDensity::inverse() const {
  return llt_.solve(Matrix::Identity(mean_.size(), mean_.size()));
}

}  // namespace pmsmc
