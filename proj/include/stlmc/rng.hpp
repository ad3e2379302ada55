#pragma once

#include "stlmc/types.hpp"

#include <cstdint>
#include <random>

namespace stlmc {

/// Deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniforms use the top 53 bits, normals use the Marsaglia polar
/// method and exponentials use inversion, so a seed reproduces the same
/// stream on every conforming platform (up to libm rounding of log/sqrt).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Uniform on [0, 1).
  double uniform();
  double normal();
  /// Exponential with density rate * exp(-rate * t).
  double exponential(double rate);
  Vec normal_vector(Eigen::Index d);
  std::size_t index(std::size_t n);

  /// Independent child stream; children of the same parent with different
  /// keys do not overlap in practice (seeds are mixed with splitmix64).
  RngStream child(std::uint64_t key) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace stlmc
