#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace defpose {

/// Seeded generator with a fixed, portable output sequence.
///
/// The engine is std::mt19937_64, whose output is pinned by the C++ standard.
/// The standard distributions are implementation-defined, so conversions are
/// done here by hand:
///   uniform01(): top 53 bits of one draw scaled by 2^-53, range [0, 1)
///   normal():    Box-Muller on two uniform01() draws, cosine branch only
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t n);
  double normal();
  /// Uniformly distributed unit vector.
  Eigen::Vector3d unit_vector();

 private:
  std::mt19937_64 engine_;
};

/// Derives a named sub-stream seed from a root seed: splitmix64 applied to
/// root ^ fnv1a64(name). Component seeds stay stable when new streams are added.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

}  // namespace defpose
