#include "condvine/random.hpp"

#include "condvine/stats.hpp"

namespace condvine {

double Rng::uniform() {
  // 53 random bits, shifted by half a unit so 0 and 1 are never produced.
  const auto bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return normal_quantile(uniform()); }

std::size_t Rng::index(std::size_t n) {
  // Lemire's multiply-shift reduction.
  __extension__ using u128 = unsigned __int128;
  const u128 product = static_cast<u128>(engine_()) * static_cast<u128>(n);
  return static_cast<std::size_t>(product >> 64);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace condvine
