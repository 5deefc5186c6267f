#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qwalk {

// SplitMix64 finaliser; used both as the stream generator and as the key mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: the stream is a pure function of
/// (master seed, trajectory index, step), so an ensemble gives the same
/// numbers under any scheduling of trajectories across workers.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t master, std::uint64_t trajectory, std::uint64_t step) noexcept
      : state_(mix64(mix64(mix64(master) ^ (trajectory + 0x632be59bd9b4e019ULL)) ^ (step + 0x85157af5ULL))) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Box-Muller; written out so results do not depend on the standard library's distributions.
  double normal(double mean, double stddev) noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n); n > 0. Rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r = next();
    while (r >= limit) r = next();
    return r % n;
  }

 private:
  std::uint64_t state_;
};

}  // namespace qwalk
