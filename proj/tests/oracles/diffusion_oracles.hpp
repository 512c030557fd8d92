#pragma once

// Reference transition densities for scalar and planar diffusions.

#include "pmsmc/models/lotka_volterra.hpp"
#include "pmsmc/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace pmsmc::testing {

// Density at y of the birth-death chain with generator
//   f -> b f' + f'' / 2   (central differences, spacing h)
// started at x and run for `horizon`, computed by uniformization. The chain
// density converges to the diffusion density at rate h^2.
inline double chain_density(const std::function<double(double)>& drift, double x, double y, double horizon,
                            double h, double half_width) {
  const int half = static_cast<int>(std::lround(half_width / h));
  const int size = 2 * half + 1;
  const int target = half + static_cast<int>(std::lround((y - x) / h));
  std::vector<double> up(size), down(size);
  const double diffusive = 0.5 / (h * h);
  for (int j = 0; j < size; ++j) {
    const double b = drift(x + (j - half) * h);
    up[j] = j + 1 < size ? diffusive + 0.5 * b / h : 0.0;
    down[j] = j > 0 ? diffusive - 0.5 * b / h : 0.0;
  }
  const double rate = 1.0 / (h * h);
  const double lt = rate * horizon;
  std::vector<double> p(size, 0.0), next(size, 0.0);
  p[half] = 1.0;
  const long last = static_cast<long>(lt + 12.0 * std::sqrt(lt) + 50.0);
  double acc = 0.0;
  for (long n = 0; n <= last; ++n) {
    const double logw = -lt + static_cast<double>(n) * std::log(lt) - std::lgamma(static_cast<double>(n) + 1.0);
    if (logw > -60.0) acc += std::exp(logw) * p[target];
    for (int j = 0; j < size; ++j) {
      double v = p[j] * (1.0 - (up[j] + down[j]) / rate);
      if (j > 0) v += p[j - 1] * up[j - 1] / rate;
      if (j + 1 < size) v += p[j + 1] * down[j + 1] / rate;
      next[j] = v;
    }
    std::swap(p, next);
  }
  return acc / h;
}

// Richardson-extrapolated chain density on spacings h and h / 2.
inline double diffusion_density(const std::function<double(double)>& drift, double x, double y, double horizon,
                                double h = 0.01, double half_width = 6.0) {
  const double coarse = chain_density(drift, x, y, horizon, h, half_width);
  const double fine = chain_density(drift, x, y, horizon, 0.5 * h, half_width);
  return (4.0 * fine - coarse) / 3.0;
}

inline double sine_density(double theta, double x, double y, double horizon) {
  return diffusion_density([theta](double v) { return std::sin(v - theta); }, x, y, horizon);
}

inline double ou_density(double theta, double x, double y, double horizon) {
  const double mean = x * std::exp(-theta * horizon);
  const double var = (1.0 - std::exp(-2.0 * theta * horizon)) / (2.0 * theta);
  const double r = y - mean;
  return std::exp(-0.5 * r * r / var) / std::sqrt(2.0 * M_PI * var);
}

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};

// Fine Euler to horizon - last, then the exact Gaussian density of one Euler
// step of length `last` to y, averaged over paths.
inline McEstimate lv_euler_density(const LotkaVolterraSpec& spec, VectorRef x, VectorRef y, double horizon,
                                   long paths, std::uint64_t seed, double step = 1e-4, double last = 1e-3) {
  RandomStream rng(seed);
  const int steps = static_cast<int>(std::lround((horizon - last) / step));
  const double sq = std::sqrt(step);
  double sum = 0.0, sum2 = 0.0;
  for (long p = 0; p < paths; ++p) {
    Vector v = x;
    for (int s = 0; s < steps; ++s) v += step * lv_drift(spec, v) + sq * lv_diffusion(spec, v) * rng.normal_vector(2);
    const Matrix sigma = lv_diffusion(spec, v);
    const Matrix cov = last * sigma * sigma.transpose();
    const Vector r = y - v - last * lv_drift(spec, v);
    const double det = cov.determinant();
    const double val = std::exp(-0.5 * r.dot(cov.inverse() * r)) / (2.0 * M_PI * std::sqrt(det));
    sum += val;
    sum2 += val * val;
  }
  const double n = static_cast<double>(paths);
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(0.0, sum2 / n - mean * mean) / (n - 1.0))};
}

}  // namespace pmsmc::testing
