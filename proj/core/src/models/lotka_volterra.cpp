#include "pmsmc/models/lotka_volterra.hpp"
#include "pmsmc/gaussian.hpp"

#include <cmath>
#include <memory>

namespace pmsmc {

namespace {

constexpr double kPositivityFloor = 1e-6;

struct LogProposal {
  Matrix gain_prior;  // P A^{-1}
  Matrix gain_obs;    // P Sigma^{-1}
  GaussianDensity noise;
  Matrix G;
  Vector obs_shift;  // log c - diag(Sigma) / 2
};

Vector log_drift(const LotkaVolterraSpec& spec, const Matrix& G, VectorRef x) {
  return lv_drift(spec, x).cwiseQuotient(Vector(x)) - 0.5 * G.diagonal();
}

void require_positive(VectorRef x, const char* what) {
  if (!(x.array() > 0.0).all()) throw Error(ErrorCode::DomainError, std::string(what) + " must be positive");
}

}  // namespace

void LotkaVolterraSpec::validate() const {
  for (double a : {a10, a11, a12, a20, a21, a22}) {
    if (!(a >= 0.0)) throw Error(ErrorCode::InvalidArgument, "LV rate coefficients must be nonnegative");
  }
  if (Gamma.rows() != 2 || Gamma.cols() != 2 || Sigma.rows() != 2 || Sigma.cols() != 2 || c.size() != 2 ||
      x0.size() != 2) {
    throw Error(ErrorCode::DimensionMismatch, "LV spec is two-dimensional");
  }
  if (!(c.array() > 0.0).all() || !(x0.array() > 0.0).all()) {
    throw Error(ErrorCode::InvalidArgument, "LV c and x0 must be positive");
  }
  Eigen::LLT<Matrix> gg(Gamma * Gamma.transpose());
  Eigen::LLT<Matrix> ss(Sigma);
  if (gg.info() != Eigen::Success || ss.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularCovariance, "LV Gamma Gamma^T and Sigma must be positive definite");
  }
  if (n_obs < 2 || !(t_end > 0.0) || !(intensity > 0.0) || !(prior_log_sd > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "LV grid, intensity and prior spread must be positive");
  }
}

Vector lv_drift(const LotkaVolterraSpec& s, VectorRef x) {
  Vector out(2);
  out << x[0] * (s.a10 - s.a11 * x[0] - s.a12 * x[1]), x[1] * (-s.a20 + s.a21 * x[0] - s.a22 * x[1]);
  return out;
}

Matrix lv_diffusion(const LotkaVolterraSpec& s, VectorRef x) { return x.asDiagonal() * s.Gamma; }

ParametrixConfig lv_parametrix_config(const LotkaVolterraSpec& spec, double horizon) {
  const Matrix G = spec.Gamma * spec.Gamma.transpose();
  ParametrixConfig cfg;
  cfg.drift = [spec](VectorRef x) { return lv_drift(spec, x); };
  cfg.drift_divergence = [spec](VectorRef x) {
    return (spec.a10 - 2.0 * spec.a11 * x[0] - spec.a12 * x[1]) + (-spec.a20 + spec.a21 * x[0] - 2.0 * spec.a22 * x[1]);
  };
  cfg.diffusion = [spec](VectorRef x) { return lv_diffusion(spec, x); };
  // gamma_il = x_i x_l G_il
  const Vector col_sums = G.colwise().sum().transpose() + G.diagonal();
  cfg.diffusion_cov_divergence = [col_sums](VectorRef x) { return Vector(x.cwiseProduct(col_sums)); };
  const double second = G.sum() + G.trace();
  cfg.diffusion_cov_second_divergence = [second](VectorRef) { return second; };
  cfg.intensity = spec.intensity;
  cfg.horizon = horizon;
  return cfg;
}

double lv_obs_density(const LotkaVolterraSpec& spec, VectorRef x, VectorRef y) {
  require_positive(x, "LV state");
  if (!(y.array() > 0.0).all()) return 0.0;
  const Vector mean = spec.c.array().log().matrix() + x.array().log().matrix() - 0.5 * spec.Sigma.diagonal();
  const GaussianDensity noise(mean, spec.Sigma);
  return std::exp(noise.log_pdf(y.array().log().matrix()) - std::log(y[0] * y[1]));
}

SsmDefinition lotka_volterra_model(const LotkaVolterraSpec& spec) {
  spec.validate();
  const double delta = spec.delta();
  const Matrix G = spec.Gamma * spec.Gamma.transpose();
  const Matrix prior_cov = delta * G;
  const Matrix prior_prec = prior_cov.inverse();
  const Matrix obs_prec = spec.Sigma.inverse();
  const Matrix post_cov = (prior_prec + obs_prec).inverse();
  auto prop = std::make_shared<const LogProposal>(LogProposal{
      post_cov * prior_prec, post_cov * obs_prec, GaussianDensity(Vector::Zero(2), post_cov), G,
      spec.c.array().log().matrix() - 0.5 * spec.Sigma.diagonal()});
  auto obs_noise = std::make_shared<const GaussianDensity>(Vector::Zero(2), spec.Sigma);
  auto parametrix = std::make_shared<const ParametrixConfig>(lv_parametrix_config(spec, delta));
  auto s = std::make_shared<const LotkaVolterraSpec>(spec);

  auto proposal_mean = [prop, s, delta](VectorRef x, VectorRef y_next) -> Vector {
    require_positive(x, "LV state");
    const Vector z = x.array().log().matrix();
    const Vector euler = z + delta * log_drift(*s, prop->G, x);
    const Vector y_tilde = y_next.array().log().matrix() - prop->obs_shift;
    return prop->gain_prior * euler + prop->gain_obs * y_tilde;
  };

  SsmDefinition m;
  m.state_dim = 2;
  m.obs_dim = 2;
  m.param_dim = 1;
  m.initial_sampler = [s](RandomStream& rng) -> Vector {
    const double sd = s->prior_log_sd;
    Vector z = s->x0.array().log().matrix() - Vector::Constant(2, 0.5 * sd * sd) + sd * rng.normal_vector(2);
    return z.array().exp().matrix();
  };
  m.initial_density_ratio = [](VectorRef) { return 1.0; };
  m.proposal_sampler = [prop, proposal_mean](int, VectorRef x, VectorRef y_next, RandomStream& rng) -> Vector {
    const Vector z = proposal_mean(x, y_next) + prop->noise.cholesky_factor() * rng.normal_vector(2);
    return z.array().exp().matrix();
  };
  m.proposal_density = [prop, proposal_mean](int, VectorRef x, VectorRef x_next, VectorRef y_next) {
    if (!(x_next.array() > 0.0).all()) return 0.0;
    const Vector z = x_next.array().log().matrix();
    return std::exp(prop->noise.log_pdf(z - proposal_mean(x, y_next)) - std::log(x_next[0] * x_next[1]));
  };
  m.obs_density = [s, obs_noise](int, VectorRef x, VectorRef y) {
    require_positive(x, "LV state");
    if (!(y.array() > 0.0).all()) return 0.0;
    const Vector resid = (y.array().log() - s->c.array().log() - x.array().log()).matrix() + 0.5 * s->Sigma.diagonal();
    return std::exp(obs_noise->log_pdf(resid) - std::log(y[0] * y[1]));
  };
  m.transition_estimator = [parametrix](int, VectorRef x, VectorRef x_next, RandomStream& rng) {
    return parametrix_transition_estimate(*parametrix, x, x_next, rng);
  };
  m.transition_estimator_is_positive = false;
  return m;
}

SimulatedData simulate_lv(const LotkaVolterraSpec& spec, std::uint64_t seed, double euler_step) {
  spec.validate();
  if (!(euler_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "Euler step must be positive");
  RandomStream rng = RngFactory(seed).stream({stream_tag::kSimulate});
  const double delta = spec.delta();
  const int substeps = std::max(1, static_cast<int>(std::lround(delta / euler_step)));
  const double h = delta / substeps;
  const double sqrt_h = std::sqrt(h);
  const double sd = spec.prior_log_sd;
  const Eigen::LLT<Matrix> sigma_llt(spec.Sigma);
  const Matrix sigma_l = sigma_llt.matrixL();

  SimulatedData data;
  Vector x = (spec.x0.array().log() - 0.5 * sd * sd + sd * rng.normal_vector(2).array()).exp().matrix();
  for (int k = 0; k < spec.n_obs; ++k) {
    if (k > 0) {
      for (int step = 0; step < substeps; ++step) {
        x += h * lv_drift(spec, x) + sqrt_h * lv_diffusion(spec, x) * rng.normal_vector(2);
        if (!(x.array() > kPositivityFloor).all()) {
          throw Error(ErrorCode::PositivityViolation, "simulated abundance fell below the positivity floor");
        }
      }
    }
    const Vector eps = -0.5 * spec.Sigma.diagonal() + sigma_l * rng.normal_vector(2);
    data.times.push_back(k * delta);
    data.states.push_back(x);
    data.observations.push_back((spec.c.array() * x.array() * eps.array().exp()).matrix());
  }
  return data;
}

}  // namespace pmsmc
