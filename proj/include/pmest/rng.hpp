#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace pmest {

/// splitmix64 finaliser; used to derive independent generator states.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// xoshiro256** engine (UniformRandomBitGenerator).
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) noexcept {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s += 0x9e3779b97f4a7c15ULL;
      word = splitmix64(s);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
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

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
};

/// (master_seed, stream_id) names one reproducible random sequence. Streams
/// are plain values: no shared state, safe to copy across threads.
struct RngStream {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  /// Fresh engine positioned at the start of this stream.
  Xoshiro256 engine() const noexcept {
    return Xoshiro256(splitmix64(master_seed) ^ splitmix64(stream_id ^ 0x5851f42d4c957f2dULL));
  }

  /// Derived sub-stream number k (per replicate, per column, ...).
  RngStream child(std::uint64_t k) const noexcept {
    return RngStream{master_seed, splitmix64(stream_id * 0xd1342543de82ef95ULL + splitmix64(k + 1))};
  }

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

}  // namespace pmest
