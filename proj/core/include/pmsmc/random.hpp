#pragma once

#include "pmsmc/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pmsmc {

// SplitMix64 finalizer; used only to turn (root, tags...) into engine seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags) noexcept;

/// A single pseudo-random stream. Satisfies UniformRandomBitGenerator so it
/// can drive the <random> distributions directly.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  Vector normal_vector(Eigen::Index dim);
  int poisson(double mean);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Derives independent streams from a root seed and integer tags, so the
/// value drawn for (step, particle, purpose) never depends on the order in
/// which streams are visited.
class RngFactory {
 public:
  explicit RngFactory(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const noexcept { return root_; }
  RandomStream stream(std::initializer_list<std::uint64_t> tags) const {
    return RandomStream(derive_seed(root_, tags));
  }
  RngFactory child(std::uint64_t tag) const { return RngFactory(derive_seed(root_, {tag})); }

 private:
  std::uint64_t root_;
};

// Stream purposes.
namespace stream_tag {
inline constexpr std::uint64_t kInit = 0x11;
inline constexpr std::uint64_t kPropagate = 0x22;
inline constexpr std::uint64_t kBackward = 0x33;
inline constexpr std::uint64_t kSimulate = 0x44;
inline constexpr std::uint64_t kReplicate = 0x55;
}  // namespace stream_tag

}  // namespace pmsmc
