#pragma once

#include "pmsmc/types.hpp"

#include <cmath>

namespace pmsmc {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Density of N(0, variance) at x.
inline double normal_pdf(double x, double variance) {
  return std::exp(-0.5 * x * x / variance - kLogSqrt2Pi - 0.5 * std::log(variance));
}

inline double normal_log_pdf(double x, double mean, double variance) {
  const double r = x - mean;
  return -0.5 * r * r / variance - kLogSqrt2Pi - 0.5 * std::log(variance);
}

/// Product of independent N(0, variance) densities over the coordinates of r.
double isotropic_normal_pdf(VectorRef r, double variance);

/// Multivariate normal, factored once so repeated evaluations are cheap.
class GaussianDensity {
 public:
  GaussianDensity(Vector mean, const Matrix& covariance);

  double log_pdf(VectorRef x) const;
  double pdf(VectorRef x) const { return std::exp(log_pdf(x)); }
  const Vector& mean() const { return mean_; }
  /// L with L L^T = covariance.
  const Matrix& cholesky_factor() const { return lower_; }
  Vector solve(VectorRef rhs) const { return llt_.solve(rhs); }
  Matrix inverse() const;

 private:
  Vector mean_;
  Eigen::LLT<Matrix> llt_;
  Matrix lower_;
  double log_norm_ = 0.0;
};

}  // namespace pmsmc
