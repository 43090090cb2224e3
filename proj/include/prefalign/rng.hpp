#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace prefalign {

/// Seeded random stream. Equal (seed, stream id) pairs give equal draw sequences
/// on every platform: the engine is mt19937_64 and every distribution is implemented
/// here rather than taken from <random>, whose distributions are not portable.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, both halves used).
  double normal();
  /// Uniform integer in [0, n); n > 0.
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Inverse-CDF draw from non-negative weights (need not sum to 1).
  std::size_t categorical(std::span<const double> weights);

  /// Independent child stream keyed by `sub`.
  RngStream derive(std::uint64_t sub) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace prefalign
