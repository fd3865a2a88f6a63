#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace perfpeel {

/// SplitMix64 finalizer; used to derive stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Derive an independent stream seed from a parent seed and a path of
/// integer labels, e.g. derive_seed(seed, {level, role, block}).
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path);

/// Seeded random source with a platform-independent output sequence.
///
/// The engine is std::mt19937_64, whose output is fixed by the standard.
/// Standard library distributions are avoided since their algorithms are
/// implementation defined. Uniform doubles use the top 53 bits; uniform
/// integers use rejection sampling; normals use the Box-Muller transform
///   z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2)
/// with u1 in (0, 1], and both values of each pair are consumed in order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Child generator on an independent stream.
  static Rng stream(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(parent, path));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform();

  /// Uniform integer in [0, bound).
  std::uint64_t uniform_index(std::uint64_t bound);

  /// Standard normal variate.
  double normal();

  /// rows x cols matrix of i.i.d. standard normals, filled column by column.
  Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace perfpeel
