#include "prefalign/rng.hpp"

#include <cmath>
#include <numbers>

#include "prefalign/numerics.hpp"

namespace prefalign {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id), engine_(splitmix64(splitmix64(seed) ^ splitmix64(~stream_id))) {}

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::size_t RngStream::index(std::size_t n) {
  require(n > 0, "RngStream::index: n must be positive");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<std::size_t>(x % bound);
}

std::size_t RngStream::categorical(std::span<const double> weights) {
  require(!weights.empty(), "RngStream::categorical: empty weights");
  double total = 0.0;
  for (double w : weights) total += w;
  require(total > 0.0, "RngStream::categorical: weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

RngStream RngStream::derive(std::uint64_t sub) const {
  return RngStream(splitmix64(seed_ ^ 0xA5A5A5A5A5A5A5A5ULL) ^ stream_, splitmix64(sub + 0x51ED270B27ULL));
}

}  // namespace prefalign
