#include "readnet/num/rng.hpp"

#include <limits>
#include <stdexcept>

namespace readnet::num {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  const auto max = std::numeric_limits<std::uint64_t>::max();
  const auto limit = max - max % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor init_uniform(const Shape& shape, double bound, Rng& rng) {
  Tensor t(shape);
  if (bound == 0.0) return t;
  for (auto& x : t.data()) x = rng.uniform(-bound, bound);
  return t;
}

}  // namespace readnet::num
