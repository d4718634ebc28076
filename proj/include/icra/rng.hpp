#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace icra {

/// SplitMix64 finalizer, used to derive independent stream states.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Hashes (seed, stream, counters...) into a 64-bit key. Distinct tuples give
/// statistically independent keys; the mapping is fixed across platforms.
constexpr std::uint64_t mix_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t a = 0,
                                std::uint64_t b = 0) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ (stream + 0x632BE59BD9B4E019ull);
  h = splitmix64(s);
  s = h ^ (a * 0xD1B54A32D192ED03ull + 1);
  h = splitmix64(s);
  s = h ^ (b * 0x8CB92BA72F3D8DD7ull + 2);
  return splitmix64(s);
}

/// xoshiro256** engine. Satisfies UniformRandomBitGenerator so it plugs into
/// the <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key = 0) { reseed(key); }

  /// Stream for (seed, stream id, counters). Same tuple, same sequence.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
    return Rng(mix_key(seed, stream_id, a, b));
  }

  void reseed(std::uint64_t key) {
    std::uint64_t s = key;
    for (auto& word : state_) word = splitmix64(s);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
};

// Stream ids reserved for the different consumers of one experiment seed.
namespace streams {
inline constexpr std::uint64_t kTasks = 1;
inline constexpr std::uint64_t kTrainBatches = 2;
inline constexpr std::uint64_t kHoldout = 3;
inline constexpr std::uint64_t kEvalId = 4;
inline constexpr std::uint64_t kEvalOod = 5;
inline constexpr std::uint64_t kInit = 6;
inline constexpr std::uint64_t kOracle = 7;
inline constexpr std::uint64_t kRates = 8;
inline constexpr std::uint64_t kIngest = 9;
}  // namespace streams

}  // namespace icra
