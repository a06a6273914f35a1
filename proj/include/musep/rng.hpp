#pragma once

#include <cstdint>
#include <random>

namespace musep {

/// Portable deterministic generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Stream seeds are derived with SplitMix64 from (seed, stream) so
/// that independent consumers (one per weight matrix, one for shuffling, one
/// per synthetic subject) never share a sequence. Distributions are written
/// out here rather than taken from <random>, whose algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal (Box-Muller, one value per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace musep
