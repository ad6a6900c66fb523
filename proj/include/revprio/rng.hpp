#pragma once

// Seeded pseudo-random generation with a fixed, platform-independent
// algorithm. The standard <random> distributions are implementation-defined,
// so nothing here touches them: every draw that affects an artifact goes
// through Rng.
//
// Engine: xoshiro256** (Blackman & Vigna), state expanded from a 64-bit seed
// with SplitMix64. Child streams are derived with split(), which mixes the
// parent seed and a stream tag through SplitMix64, so sibling streams do not
// depend on how many draws the parent has made.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace revprio {

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  // Independent child stream identified by a numeric tag.
  Rng split(std::uint64_t stream) const noexcept {
    std::uint64_t sm = seed_ ^ (stream * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL);
    return Rng(splitmix64(sm));
  }

  // Child stream identified by a name (FNV-1a of the name).
  Rng split(std::string_view name) const noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return split(h);
  }

  std::uint64_t next() noexcept {
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

  // Uniform integer in [0, bound). Lemire's multiply-and-reject; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace revprio
