#pragma once

#include <array>
#include <cstdint>

namespace hybridfilt {

//---------------------------------------------------------------------------//
/*!
 * Philox4x32-10 counter-based block generator (Salmon et al., SC'11).
 *
 * Maps a 128-bit counter and a 64-bit key to 128 random bits. Distinct
 * (key, counter) pairs give independent blocks, which is what makes streams
 * splittable without shared state.
 */
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key);
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Named streams consumed by the simulator and the Monte-Carlo oracle.
enum class StreamId : std::uint64_t {
  kInitialState = 1,
  kClocks = 2,
  kNoise = 3,
  kRestarts = 4,
};

//---------------------------------------------------------------------------//
/*!
 * A reproducible random stream: Philox keyed by the seed, with the stream id
 * occupying the upper half of the counter and a block index the lower half.
 */
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id);
  RandomStream(std::uint64_t seed, StreamId id)
      : RandomStream(seed, static_cast<std::uint64_t>(id)) {}

  // Independent child stream, e.g. one per particle.
  RandomStream split(std::uint64_t child) const;

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Standard exponential.
  double exponential();
  // Standard normal (Box-Muller, pairs cached).
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  Philox4x32::Key key_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;  // 32-bit words consumed from buffer_
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;

  std::uint32_t next_u32();
};

}  // namespace hybridfilt
