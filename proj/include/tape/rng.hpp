#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tape {

// Counter-based random numbers. Every draw is a pure function of
// (key, counter), so streams never depend on evaluation order and results
// are identical across platforms (unlike std:: distributions).

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t mix_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
  return mix_key(mix_key(a, b), c);
}

inline std::uint64_t counter_bits(std::uint64_t key, std::uint64_t counter) noexcept {
  return splitmix64(key ^ splitmix64(counter));
}

// Uniform in [0, 1) with 53 bits.
inline double counter_uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  return static_cast<double>(counter_bits(key, counter) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two consecutive counters.
inline double counter_normal(std::uint64_t key, std::uint64_t counter) noexcept {
  double u1 = counter_uniform(key, 2 * counter);
  const double u2 = counter_uniform(key, 2 * counter + 1);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Sequential generator for shuffles and sampling. Deterministic on every
// platform since bounded draws are done here rather than by <random>.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : key_(splitmix64(seed)) {}

  std::uint64_t next() noexcept { return counter_bits(key_, counter_++); }
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n) noexcept {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return static_cast<std::size_t>(x % bound);
  }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    shuffle(std::span<T>(items));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tape
