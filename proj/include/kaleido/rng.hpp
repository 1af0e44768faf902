#pragma once

#include <cstdint>
#include <random>

namespace kaleido {

/// Portable seeded generator: std::mt19937_64 (output sequence fixed by the standard)
/// with its seed scrambled through SplitMix64, and Gaussian draws by the Box-Muller
/// transform so results do not depend on the standard library's distributions.
///
/// Stream splitting: the generator for sub-stream `index` of `seed` is seeded with
/// splitmix64(seed + 0x9E3779B97F4A7C15 * (index + 1)). Scene synthesis uses the point
/// index as the stream index; sweeps use the trial index.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  /// Raw 64-bit draw, used to derive seeds for nested streams.
  std::uint64_t bits() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace kaleido
