#pragma once

#include <cstdint>
#include <random>
#include <vector>

// Seeded randomness with counter-based substreams: every (master seed, trial
// index) pair maps to an independent stream, so parallel experiment execution
// reproduces serial execution exactly. Gaussian draws use the Marsaglia polar
// method on top of mt19937_64 instead of std::normal_distribution, whose
// output sequence is implementation-defined.

namespace mlsc {

/// SplitMix64 step; also used as the seed mixer.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derives an independent stream seed from (master, a, b).
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform();
  /// Standard normal (polar method; consumes a variable number of uniforms).
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  /// Sorted 1-based subset of {1..population} of the given size, uniform over
  /// all subsets (partial Fisher-Yates).
  std::vector<int> subset(int population, int size);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mlsc
