#include "pmsmc/random.hpp"

namespace pmsmc {

std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(root);
  std::uint64_t position = 0;
  for (std::uint64_t tag : tags) {
    h = mix64(h ^ mix64(tag + 0x632be59bd9b4e019ULL * ++position));
  }
  return h;
}

double RandomStream::uniform_open() {
  double u = 0.0;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

Vector RandomStream::normal_vector(Eigen::Index dim) {
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal();
  return v;
}

int RandomStream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<int> dist(mean);
  return dist(engine_);
}

}  // namespace pmsmc
