#pragma once

// Random streams for rare-event runs.
//
// Every run owns one sequential stream. Streams are keyed by
// (master seed, grid salt, run index) through a SplitMix64 finalizer, so the
// stream of run m never depends on how many other runs exist or on the order
// in which worker threads pick them up.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>

namespace ams {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Sub-seed for run `run_index` of grid point `grid_salt`.
///
/// The construction is a keyed counter: the master seed and the salt are
/// hashed into a key, and the run index is the counter. Changing the number of
/// runs or adding grid points leaves existing (salt, index) pairs untouched.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t grid_salt,
                                    std::uint64_t run_index) noexcept {
  const std::uint64_t key = mix64(mix64(master) ^ (grid_salt * 0xD1B54A32D192ED03ULL));
  return mix64(key + mix64(run_index + 1));
}

/// xoshiro256++ (Blackman and Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed) noexcept {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s += 0x9E3779B97F4A7C15ULL;
      std::uint64_t z = s;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      word = z ^ (z >> 31);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

/// The per-run stream: raw bits plus the few distributions the engine needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Standard normal draw.
  double gaussian() { return normal_(engine_); }

  /// Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }

  /// Uniform integer in [0, n). Requires n > 0.
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  Xoshiro256pp& engine() noexcept { return engine_; }

 private:
  Xoshiro256pp engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace ams
