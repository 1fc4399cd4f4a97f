#include "zrnmt/rng.hpp"

#include <cmath>

namespace zrnmt {

double Rng::normal(double mean, double sigma) {
  // Box-Muller; discard the second deviate so one call = two bit draws.
  double u1 = uniform(0.0, 1.0);
  double u2 = uniform(0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform(0.0, 1.0);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  return mean + sigma * r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = bits();
  while (x >= limit) x = bits();
  return x % n;
}

}  // namespace zrnmt
