#include "pmsmc/estimators.hpp"
#include "pmsmc/gaussian.hpp"

#include <cmath>

namespace pmsmc {

namespace {

Matrix diffusion_covariance(const ParametrixConfig& cfg, VectorRef x) {
  const Matrix sigma = cfg.diffusion(x);
  return sigma * sigma.transpose();
}

// Cholesky of u * gamma(x); DegenerateDiffusion when not positive definite.
Eigen::LLT<Matrix> factor_proposal(const Matrix& gamma, double u) {
  Eigen::LLT<Matrix> llt(u * gamma);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    throw Error(ErrorCode::DegenerateDiffusion, "sigma sigma^T is singular at a visited point");
  }
  return llt;
}

double log_density_from_factor(const Eigen::LLT<Matrix>& llt, VectorRef residual) {
  const Matrix& lu = llt.matrixLLT();
  const Vector z = llt.matrixL().solve(residual);
  const double log_det = 2.0 * lu.diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - static_cast<double>(residual.size()) * kLogSqrt2Pi - 0.5 * log_det;
}

}  // namespace

double log_euler_density(const ParametrixConfig& cfg, VectorRef x, VectorRef z, double u) {
  const Matrix gamma = diffusion_covariance(cfg, x);
  const auto llt = factor_proposal(gamma, u);
  const Vector residual = z - x - u * cfg.drift(x);
  return log_density_from_factor(llt, residual);
}

double euler_density(const ParametrixConfig& cfg, VectorRef x, VectorRef z, double u) {
  return std::exp(log_euler_density(cfg, x, z, u));
}

double parametrix_rho(const ParametrixConfig& cfg, VectorRef x, VectorRef z, double u) {
  const Vector alpha_x = cfg.drift(x);
  const Vector alpha_z = cfg.drift(z);
  const Matrix gamma_x = diffusion_covariance(cfg, x);
  const Matrix gamma_z = diffusion_covariance(cfg, z);
  const auto llt = factor_proposal(gamma_x, u);

  // grad m / m = -C^{-1} r and hess m / m = C^{-1} r r^T C^{-1} - C^{-1},
  // with C = u gamma(x) and r = z - x - u alpha(x).
  const Vector s = llt.solve(z - x - u * alpha_x);
  const Vector grad_log = -s;
  const Matrix c_inv = llt.solve(Matrix::Identity(x.size(), x.size()));
  const Matrix hess_ratio = s * s.transpose() - c_inv;

  double diff = -(alpha_z - alpha_x).dot(grad_log);
  if (cfg.drift_divergence) diff -= cfg.drift_divergence(z);
  if (cfg.diffusion_cov_second_divergence) diff += 0.5 * cfg.diffusion_cov_second_divergence(z);
  if (cfg.diffusion_cov_divergence) diff += cfg.diffusion_cov_divergence(z).dot(grad_log);
  diff += 0.5 * ((gamma_z - gamma_x).array() * hess_ratio.array()).sum();

  return 1.0 + diff / cfg.intensity;
}

DensityDraw parametrix_transition_estimate(const ParametrixConfig& cfg, VectorRef x, VectorRef y,
                                           RandomStream& rng) {
  if (!(cfg.intensity > 0.0) || !(cfg.horizon > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "parametrix needs positive intensity and horizon");
  }
  std::exponential_distribution<double> gap(cfg.intensity);
  Vector current = x;
  double weight = 1.0;
  double s = 0.0;
  int events = 0;
  for (;;) {
    const double next = s + gap(rng);
    if (next >= cfg.horizon) break;
    const double du = next - s;
    const Matrix sigma = cfg.diffusion(current);
    Vector proposed = current + du * cfg.drift(current) + std::sqrt(du) * sigma * rng.normal_vector(x.size());
    weight *= parametrix_rho(cfg, current, proposed, du);
    current = std::move(proposed);
    s = next;
    ++events;
  }
  const double log_scale = log_euler_density(cfg, current, y, cfg.horizon - s);
  if (!std::isfinite(weight) || std::isnan(log_scale) || log_scale == INFINITY) {
    throw Error(ErrorCode::NonFiniteWeight, "parametrix estimate is not finite");
  }
  return DensityDraw{weight, events, log_scale};
}

}  // namespace pmsmc
