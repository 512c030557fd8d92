#include "pmsmc/gaussian.hpp"
#include "pmsmc/models/linear_gaussian.hpp"
#include "pmsmc/models/lotka_volterra.hpp"
#include "pmsmc/models/rnn.hpp"
#include "pmsmc/models/sine.hpp"
#include "stats.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <memory>

using namespace pmsmc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vector s(double v) { return Vector::Constant(1, v); }

// Dense Gaussian conditioning of the stacked scalar state on all observations.
std::vector<double> joint_gaussian_means(const LinearGaussianSpec& spec, const std::vector<Vector>& y) {
  const int n = static_cast<int>(y.size());
  const double a = spec.A(0, 0), q = spec.Q(0, 0), h = spec.H(0, 0), r = spec.R(0, 0);
  Matrix cov_x(n, n);
  Vector mean_x(n);
  std::vector<double> var(static_cast<std::size_t>(n));
  var[0] = spec.P0(0, 0);
  mean_x[0] = spec.m0[0];
  for (int k = 1; k < n; ++k) {
    var[static_cast<std::size_t>(k)] = a * a * var[static_cast<std::size_t>(k - 1)] + q;
    mean_x[k] = a * mean_x[k - 1];
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int lo = std::min(i, j);
      cov_x(i, j) = std::pow(a, std::abs(i - j)) * var[static_cast<std::size_t>(lo)];
    }
  const Matrix cov_y = h * h * cov_x + r * Matrix::Identity(n, n);
  Vector yy(n);
  for (int k = 0; k < n; ++k) yy[k] = y[static_cast<std::size_t>(k)][0];
  const Vector post = mean_x + h * cov_x * cov_y.ldlt().solve(yy - h * mean_x);
  return std::vector<double>(post.data(), post.data() + n);
}

}  // namespace

TEST_CASE("Kalman / RTS") {
  const auto spec = LinearGaussianSpec::scalar(0.7, 0.4, 1.3, 0.6, 0.2, 1.5);
  const auto data = simulate_linear_gaussian(spec, 5, 1);
  const auto kf = kalman_rts(spec, data.observations);
  const auto joint = joint_gaussian_means(spec, data.observations);
  for (std::size_t k = 0; k < 6; ++k) CHECK_THAT(kf.smoother_means[k][0], WithinAbs(joint[k], 1e-8));
  CHECK(kf.smoother_means.back() == kf.filter_means.back());

  // Near-exact observations pin the smoother to the data.
  const auto sharp = LinearGaussianSpec::scalar(0.7, 0.4, 1.0, 1e-10);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK_THAT(kalman_rts(sharp, data.observations).smoother_means[k][0], WithinAbs(data.observations[k][0], 1e-4));
  }

  // No dynamics: the smoother at k only sees y_k and the prior.
  const auto frozen = LinearGaussianSpec::scalar(0.0, 1.0, 1.0, 1.0);
  auto y = data.observations;
  const double before = kalman_rts(frozen, y).smoother_means[2][0];
  y[4][0] += 10.0;
  CHECK(kalman_rts(frozen, y).smoother_means[2][0] == before);

  const auto bad = LinearGaussianSpec::scalar(0.7, -1.0, 1.0, 1.0);
  CHECK_THROWS_AS(kalman_rts(bad, y), Error);
}

TEST_CASE("linear-Gaussian family scores match finite differences of the densities") {
  const auto base = LinearGaussianSpec::scalar(0.8, 0.5, 1.2, 0.7);
  Vector th(2);
  th << 0.8, 1.2;
  const auto m = linear_gaussian_family(base)(th);
  RandomStream rng(1);
  const double eps = 1e-6;
  Vector up = th, down = th;
  up[0] += eps;
  down[0] -= eps;
  const auto mu = linear_gaussian_family(base)(up);
  const auto md = linear_gaussian_family(base)(down);
  const double fd_q = (std::log(mu.transition_estimator(0, s(0.3), s(-0.2), rng).value) -
                       std::log(md.transition_estimator(0, s(0.3), s(-0.2), rng).value)) /
                      (2 * eps);
  CHECK_THAT(m.grad_log_transition_estimator(0, s(0.3), s(-0.2), rng)[0], WithinRel(fd_q, 1e-6));
  up = th;
  down = th;
  up[1] += eps;
  down[1] -= eps;
  const double fd_g = (linear_gaussian_family(base)(up).obs_density(0, s(0.3), s(1.0)) -
                       linear_gaussian_family(base)(down).obs_density(0, s(0.3), s(1.0))) /
                      (2 * eps);
  CHECK_THAT(m.obs_density_grad(0, s(0.3), s(1.0))[1], WithinRel(fd_g, 1e-6));
}

TEST_CASE("RNN model") {
  const RnnSsmSpec spec = rnn_preset(8);
  CHECK(spec.state_dim() == 8);
  const auto data = simulate_rnn_ssm(spec, 30, 2);
  const auto again = simulate_rnn_ssm(spec, 30, 2);
  CHECK(data.states.back() == again.states.back());
  const auto obs = std::make_shared<const std::vector<Vector>>(data.observations);
  const SsmDefinition model = rnn_model(spec, obs);
  for (std::size_t k = 0; k + 1 < data.states.size(); ++k) {
    RandomStream rng(0);
    const double q = model.transition_estimator(static_cast<int>(k), data.states[k], data.states[k + 1], rng).value;
    CHECK(std::isfinite(q));
    CHECK(q > 0.0);
  }

  // Quadrature over (-1, 1) in one dimension.
  RnnSsmSpec one = synthesize_rnn_spec(1, 1, 3);
  const Vector x = s(0.3), y = s(-0.5);
  const int m = 400000;
  double integral = 0.0;
  for (int i = 0; i < m; ++i) {
    const double u = -1.0 + (i + 0.5) * 2.0 / m;
    integral += rnn_transition_density(one, x, y, s(u)) * 2.0 / m;
  }
  CHECK_THAT(integral, WithinAbs(1.0, 1e-6));

  // Vanishing state noise: deterministic tanh map.
  RnnSsmSpec still = spec;
  still.q_diag.setConstant(1e-30);
  const auto d = simulate_rnn_ssm(still, 3, 4);
  const Vector expect = (still.W1 * d.observations[1] + still.W2 * d.states[1] + still.b).array().tanh().matrix();
  CHECK((d.states[2] - expect).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(rnn_transition_density(one, x, y, s(1.0)), Error);
}

TEST_CASE("sine proposal is a normalised Gaussian with the conjugate variance") {
  SineSpec spec;
  CHECK_THAT(sine_proposal_variance(spec), WithinAbs(0.5 / 1.5, 1e-15));
  const SsmDefinition m = sine_model(spec);
  double integral = 0.0;
  const double h = 1e-3;
  for (int i = -20000; i <= 20000; ++i) integral += m.proposal_density(0, s(0.4), s(i * h), s(1.1)) * h;
  CHECK_THAT(integral, WithinAbs(1.0, 1e-8));
  CHECK(m.transition_estimator_is_positive);
  CHECK(sine_benchmark_spec().gpe_replicates == 30);
}

TEST_CASE("sine AR bound dominates every averaged GPE draw") {
  SineSpec spec = sine_benchmark_spec();
  const SsmDefinition m = sine_model(spec);
  const ArBoundFn bound = sine_ar_bound(spec);
  ParticleCloud c;
  c.particles = Matrix(1, 5);
  c.particles << -1.0, -0.2, 0.3, 0.9, 2.0;
  c.weights = Vector::Ones(5);
  RandomStream rng(5);
  for (int t = 0; t < 2000; ++t) {
    const Vector xn = s(rng.uniform(-3, 3));
    const double b = bound(0, c, xn);
    for (int l = 0; l < 5; ++l) REQUIRE(m.transition_estimator(0, c.particles.col(l), xn, rng).value <= b);
  }
}

TEST_CASE("sine simulators") {
  SineSpec spec;
  const auto a = simulate_sine(spec, 10, 7);
  CHECK(a.observations.size() == 11);
  CHECK(a.times.back() == 5.0);
  CHECK(simulate_sine(spec, 10, 7).states.back() == a.states.back());

  // Exact-algorithm and fine-Euler increments agree in law.
  testing::RunningStats ea, eu, ea2, eu2;
  for (std::uint64_t r = 0; r < 4000; ++r) {
    const double x1 = simulate_sine(spec, 1, 100 + r).states[1][0];
    ea.add(x1);
    ea2.add(x1 * x1);
  }
  for (std::uint64_t r = 0; r < 4000; ++r) {
    const double x1 = simulate_sine(spec, 1, 100000 + r, true).states[1][0];
    eu.add(x1);
    eu2.add(x1 * x1);
  }
  const auto sa = ea.summary(), se = eu.summary();
  CHECK(std::abs(sa.mean - se.mean) < 3.0 * std::hypot(sa.se, se.se));
  const auto sa2 = ea2.summary(), se2 = eu2.summary();
  CHECK(std::abs(sa2.mean - se2.mean) < 3.0 * std::hypot(sa2.se, se2.se));

  // Over a long record the state hops between wells; modulo 2 pi it follows
  // the stationary law proportional to exp(-2 cos(x - theta)), for which
  // E[cos(X - theta)] = -I1(2) / I0(2). Batch means absorb the autocorrelation.
  const auto long_run = simulate_sine(spec, 20000, 8);
  testing::RunningStats batches;
  for (int b = 0; b < 100; ++b) {
    double acc = 0.0;
    for (int k = 0; k < 200; ++k) acc += std::cos(long_run.states[static_cast<std::size_t>(1 + 200 * b + k)][0] - spec.theta);
    batches.add(acc / 200.0);
  }
  const double stationary = -std::cyl_bessel_i(1.0, 2.0) / std::cyl_bessel_i(0.0, 2.0);
  INFO("mean cos " << batches.summary().mean << " se " << batches.summary().se << " target " << stationary);
  CHECK(testing::within_se(batches.summary(), stationary));

  SineSpec flat = spec;
  flat.zero_drift = true;
  const SsmDefinition fm = sine_model(flat);
  CHECK_THAT(sine_proposal_mean(flat, 0.7, 0.0), WithinAbs(0.7 * sine_proposal_variance(flat) / 0.5, 1e-15));
  (void)fm;
}

TEST_CASE("Lotka-Volterra model") {
  LotkaVolterraSpec spec;
  Vector x(2);
  x << 1.0, 1.0;
  const Vector a = lv_drift(spec, x);
  CHECK_THAT(a[0], WithinAbs(0.8, 1e-15));
  CHECK_THAT(a[1], WithinAbs(-1.2, 1e-15));

  // exp(eps) has mean one, so c_i x_i is the conditional mean of Y_i.
  RandomStream rng(9);
  const Eigen::LLT<Matrix> llt(spec.Sigma);
  testing::RunningStats e1;
  for (int i = 0; i < 200000; ++i) {
    const Vector eps = -0.5 * spec.Sigma.diagonal() + Matrix(llt.matrixL()) * rng.normal_vector(2);
    e1.add(std::exp(eps[0]));
  }
  CHECK(testing::within_se(e1.summary(), 1.0));

  const auto data = simulate_lv(spec, 10);
  CHECK(data.observations.size() == 301);
  CHECK_THAT(data.times.back(), WithinAbs(3.0, 1e-12));
  for (const auto& y : data.observations) CHECK((y.array() > 0.0).all());
  // Oscillatory regime: the log-state turns around the coexistence point by
  // most of a revolution, the prey peaks and the predator bottoms out and
  // peaks inside the window.
  const double x2e = (spec.a10 * spec.a21 - spec.a11 * spec.a20) / (spec.a12 * spec.a21 + spec.a11 * spec.a22);
  const double x1e = (spec.a20 + spec.a22 * x2e) / spec.a21;
  const auto angle = [&](const Vector& v) { return std::atan2(std::log(v[1] / x2e), std::log(v[0] / x1e)); };
  double winding = 0.0;
  for (std::size_t k = 1; k < data.states.size(); ++k) {
    winding += std::remainder(angle(data.states[k]) - angle(data.states[k - 1]), 2.0 * kPi);
  }
  INFO("winding " << winding / (2.0 * kPi));
  CHECK(std::abs(winding) > 0.75 * 2.0 * kPi);
  const auto interior_extremum = [&](int i, bool peak) {
    const int w = 20;
    for (int k = w; k + w < 301; ++k) {
      const double v = data.states[static_cast<std::size_t>(k)][i];
      bool ok = true;
      for (int j = k - w; j <= k + w && ok; ++j) {
        const double u = data.states[static_cast<std::size_t>(j)][i];
        ok = peak ? u <= v : u >= v;
      }
      if (ok) return true;
    }
    return false;
  };
  CHECK(interior_extremum(0, true));
  CHECK(interior_extremum(1, false));
  CHECK(interior_extremum(1, true));

  const SsmDefinition m = lotka_volterra_model(spec);
  CHECK_FALSE(m.transition_estimator_is_positive);
  // Observation density integrates to one over y (log-space quadrature).
  double integral = 0.0;
  const double h = 0.01;
  for (int i = -300; i <= 300; ++i)
    for (int j = -300; j <= 300; ++j) {
      Vector y(2);
      y << std::exp(i * h), std::exp(j * h);
      integral += m.obs_density(0, x, y) * y[0] * y[1] * h * h;
    }
  CHECK_THAT(integral, WithinAbs(1.0, 1e-6));
  // Proposal density integrates to one as well.
  double pint = 0.0;
  Vector yo(2);
  yo << 1.1, 0.9;
  for (int i = -300; i <= 300; ++i)
    for (int j = -300; j <= 300; ++j) {
      Vector z(2);
      z << std::exp(i * h * 0.2), std::exp(j * h * 0.2);
      pint += m.proposal_density(0, x, z, yo) * z[0] * z[1] * h * h * 0.04;
    }
  CHECK_THAT(pint, WithinAbs(1.0, 1e-6));

  LotkaVolterraSpec fragile = spec;
  fragile.Gamma = 3.0 * Matrix::Identity(2, 2);
  CHECK_THROWS_AS(simulate_lv(fragile, 1), Error);
}
