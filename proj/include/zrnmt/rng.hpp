#ifndef ZRNMT_RNG_HPP
#define ZRNMT_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace zrnmt {

// Seeded RNG wrapper. All draws go through the raw mt19937_64 bit stream so
// results do not depend on the standard library's distribution internals.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in [lo, hi) from the top 53 bits.
  double uniform(double lo, double hi) {
    const double u = (bits() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  // Standard normal via Box-Muller on two uniform draws.
  double normal(double mean, double sigma);

  // Uniform integer in [0, n). Rejection sampling keeps the draw unbiased.
  std::uint64_t below(std::uint64_t n);

  // Derive an independent stream for a named purpose. Fixed mixing constant
  // keeps the scheme stable across runs and platforms.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t purpose) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (purpose + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

private:
  std::mt19937_64 engine_;
};

// Fisher-Yates shuffle driven by Rng::below.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace zrnmt

#endif
