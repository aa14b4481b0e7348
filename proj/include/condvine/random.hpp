#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace condvine {

/// Seeded generator with platform-independent uniform and normal draws.
///
/// The standard library distributions are implementation-defined, so the
/// mapping from engine output to variates is done here explicitly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Standard normal via the inverse CDF of a uniform draw.
  double normal();

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

/// Counter-based seed derivation (splitmix64 of master and counter).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter);

}  // namespace condvine
