#include "mlsc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mlsc {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s ^= a;
  h ^= splitmix64(s);
  s ^= b;
  h ^= splitmix64(s);
  return h;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  have_spare_ = true;
  return u * f;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::below: zero bound");
  // Rejection to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

std::vector<int> Rng::subset(int population, int size) {
  if (size < 0 || size > population)
    throw std::invalid_argument("Rng::subset: size outside [0, population]");
  std::vector<int> pool(population);
  std::iota(pool.begin(), pool.end(), 1);
  for (int i = 0; i < size; ++i) {
    const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(population - i)));
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> out(pool.begin(), pool.begin() + size);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mlsc
