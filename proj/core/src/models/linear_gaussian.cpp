#include "pmsmc/models/linear_gaussian.hpp"
#include "pmsmc/gaussian.hpp"

#include <cmath>
#include <memory>

namespace pmsmc {

namespace {

void require_spd(const Matrix& m, const char* name) {
  Eigen::LLT<Matrix> llt(m);
  if (m.rows() != m.cols() || llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularCovariance, std::string(name) + " is not symmetric positive definite");
  }
}

Vector draw_gaussian(const GaussianDensity& g, RandomStream& rng) {
  return g.mean() + g.cholesky_factor() * rng.normal_vector(g.mean().size());
}

}  // namespace

void LinearGaussianSpec::validate() const {
  const auto d = A.rows();
  const auto m = H.rows();
  if (d < 1 || A.cols() != d || Q.rows() != d || H.cols() != d || R.rows() != m || m0.size() != d ||
      P0.rows() != d || m < 1) {
    throw Error(ErrorCode::DimensionMismatch, "linear-Gaussian spec dimensions are inconsistent");
  }
  require_spd(Q, "Q");
  require_spd(R, "R");
  require_spd(P0, "P0");
}

LinearGaussianSpec LinearGaussianSpec::scalar(double a, double q, double h, double r, double m0, double p0) {
  LinearGaussianSpec s;
  s.A = Matrix::Constant(1, 1, a);
  s.Q = Matrix::Constant(1, 1, q);
  s.H = Matrix::Constant(1, 1, h);
  s.R = Matrix::Constant(1, 1, r);
  s.m0 = Vector::Constant(1, m0);
  s.P0 = Matrix::Constant(1, 1, p0);
  return s;
}

SimulatedData simulate_linear_gaussian(const LinearGaussianSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "negative horizon");
  RandomStream rng = RngFactory(seed).stream({stream_tag::kSimulate});
  const GaussianDensity prior(spec.m0, spec.P0);
  const GaussianDensity state_noise(Vector::Zero(spec.state_dim()), spec.Q);
  const GaussianDensity obs_noise(Vector::Zero(spec.obs_dim()), spec.R);
  SimulatedData data;
  Vector x = draw_gaussian(prior, rng);
  for (int k = 0; k <= n; ++k) {
    if (k > 0) x = spec.A * x + draw_gaussian(state_noise, rng);
    data.times.push_back(k);
    data.states.push_back(x);
    data.observations.push_back(spec.H * x + draw_gaussian(obs_noise, rng));
  }
  return data;
}

SsmDefinition linear_gaussian_model(const LinearGaussianSpec& spec) {
  spec.validate();
  auto s = std::make_shared<const LinearGaussianSpec>(spec);
  auto prior = std::make_shared<const GaussianDensity>(spec.m0, spec.P0);
  auto state_noise = std::make_shared<const GaussianDensity>(Vector::Zero(spec.state_dim()), spec.Q);
  auto obs_noise = std::make_shared<const GaussianDensity>(Vector::Zero(spec.obs_dim()), spec.R);

  SsmDefinition m;
  m.state_dim = spec.state_dim();
  m.obs_dim = spec.obs_dim();
  m.param_dim = 1;
  m.initial_sampler = [prior](RandomStream& rng) { return draw_gaussian(*prior, rng); };
  m.initial_density_ratio = [](VectorRef) { return 1.0; };
  m.proposal_sampler = [s, state_noise](int, VectorRef x, VectorRef, RandomStream& rng) -> Vector {
    return s->A * x + draw_gaussian(*state_noise, rng);
  };
  auto transition = [s, state_noise](VectorRef x, VectorRef x_next) {
    return state_noise->pdf(x_next - s->A * x);
  };
  m.proposal_density = [transition](int, VectorRef x, VectorRef x_next, VectorRef) { return transition(x, x_next); };
  m.obs_density = [s, obs_noise](int, VectorRef x, VectorRef y) { return obs_noise->pdf(y - s->H * x); };
  m.transition_estimator = [transition](int, VectorRef x, VectorRef x_next, RandomStream&) {
    return DensityDraw{transition(x, x_next), 0};
  };
  m.transition_estimator_is_positive = true;
  return m;
}

ArBoundFn linear_gaussian_ar_bound(const LinearGaussianSpec& spec) {
  spec.validate();
  const int d = spec.state_dim();
  const double peak = GaussianDensity(Vector::Zero(d), spec.Q).pdf(Vector::Zero(d));
  return [peak](int, const ParticleCloud&, VectorRef) { return peak; };
}

LinearGaussianSpec linear_gaussian_with(const LinearGaussianSpec& base, VectorRef theta) {
  if (theta.size() != 2) throw Error(ErrorCode::DimensionMismatch, "linear-Gaussian family expects theta = (a, h)");
  LinearGaussianSpec s = base;
  s.A(0, 0) = theta[0];
  s.H(0, 0) = theta[1];
  return s;
}

ModelFamily linear_gaussian_family(const LinearGaussianSpec& base) {
  if (base.state_dim() != 1 || base.obs_dim() != 1) {
    throw Error(ErrorCode::DimensionMismatch, "linear-Gaussian family is scalar only");
  }
  return [base](VectorRef theta) {
    const LinearGaussianSpec s = linear_gaussian_with(base, theta);
    SsmDefinition m = linear_gaussian_model(s);
    m.param_dim = 2;
    const double a = s.A(0, 0);
    const double h = s.H(0, 0);
    const double q = s.Q(0, 0);
    const double r = s.R(0, 0);
    m.obs_density_grad = [h, r](int, VectorRef x, VectorRef y) {
      const double resid = y[0] - h * x[0];
      const double g = normal_pdf(resid, r);
      Vector grad(2);
      grad << 0.0, g * resid * x[0] / r;
      return grad;
    };
    m.grad_log_transition_estimator = [a, q](int, VectorRef x, VectorRef x_next, RandomStream&) {
      Vector grad(2);
      grad << (x_next[0] - a * x[0]) * x[0] / q, 0.0;
      return grad;
    };
    return m;
  };
}

KalmanResult kalman_rts(const LinearGaussianSpec& spec, const std::vector<Vector>& observations) {
  spec.validate();
  const std::size_t n = observations.size();
  KalmanResult out;
  Vector m = spec.m0;
  Matrix P = spec.P0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      m = spec.A * m;
      P = spec.A * P * spec.A.transpose() + spec.Q;
    }
    out.predicted_means.push_back(m);
    out.predicted_covs.push_back(P);
    const Matrix S = spec.H * P * spec.H.transpose() + spec.R;
    const GaussianDensity innovation(spec.H * m, S);
    const double lp = innovation.log_pdf(observations[k]);
    out.log_predictive.push_back(lp);
    out.log_likelihood += lp;
    const Matrix gain = P * spec.H.transpose() * innovation.inverse();
    m = m + gain * (observations[k] - spec.H * m);
    P = P - gain * spec.H * P;
    P = 0.5 * (P + P.transpose());
    out.filter_means.push_back(m);
    out.filter_covs.push_back(P);
  }
  out.smoother_means = out.filter_means;
  out.smoother_covs = out.filter_covs;
  if (n == 0) return out;
  for (std::size_t k = n - 1; k-- > 0;) {
    const Matrix& Pp = out.predicted_covs[k + 1];
    Eigen::LLT<Matrix> llt(Pp);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularCovariance, "singular predicted covariance");
    const Matrix G = (llt.solve(spec.A * out.filter_covs[k])).transpose();
    out.smoother_means[k] = out.filter_means[k] + G * (out.smoother_means[k + 1] - out.predicted_means[k + 1]);
    out.smoother_covs[k] = out.filter_covs[k] + G * (out.smoother_covs[k + 1] - Pp) * G.transpose();
  }
  return out;
}

std::vector<Vector> kalman_log_predictive_gradients(const std::function<LinearGaussianSpec(VectorRef)>& family,
                                                    VectorRef theta, const std::vector<Vector>& observations,
                                                    double step) {
  const auto q = theta.size();
  std::vector<Vector> grads(observations.size(), Vector::Zero(q));
  for (Eigen::Index j = 0; j < q; ++j) {
    Vector up = theta;
    Vector down = theta;
    up[j] += step;
    down[j] -= step;
    const KalmanResult plus = kalman_rts(family(up), observations);
    const KalmanResult minus = kalman_rts(family(down), observations);
    for (std::size_t k = 0; k < observations.size(); ++k) {
      grads[k][j] = (plus.log_predictive[k] - minus.log_predictive[k]) / (2.0 * step);
    }
  }
  return grads;
}

}  // namespace pmsmc
