#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "rctsynth/special.hpp"

namespace rctsynth {

using Seed = std::uint64_t;

// SplitMix64 finalizer; used to derive independent child seeds from a
// parent seed and a counter.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline Seed derive_seed(Seed parent, std::uint64_t stream) {
  return splitmix64(splitmix64(parent) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

// Thin wrapper over mt19937_64 with platform-independent variate
// generation (the std:: distributions are implementation defined).
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed) {}

  // Uniform on the open interval (0,1); 52-bit grid, never 0 or 1.
  double uniform() {
    const std::uint64_t k = engine_() >> 12;
    return (static_cast<double>(k) + 0.5) * 0x1p-52;
  }

  double normal() { return normal_quantile(uniform()); }

  // Uniform index in [0, n). Rejection keeps it unbiased.
  std::size_t index(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % bound);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Fisher-Yates with the portable index().
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.index(i)]);
  }
}

}  // namespace rctsynth
