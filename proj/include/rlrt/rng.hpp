#pragma once

// Counter-based random streams. Every replication draws from its own
// Philox4x32-10 stream keyed by (master seed, cell, replication), so results
// do not depend on which thread ran which replication.
//
// Salmon, Moraes, Dror, Shaw: "Parallel random numbers: as easy as 1, 2, 3" (SC'11).

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rlrt::rng {

class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block counter, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeylA;
        key[1] += kWeylB;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * counter[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * counter[2];
      counter = {static_cast<std::uint32_t>(p1 >> 32) ^ counter[1] ^ key[0], static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ counter[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return counter;
  }

 private:
  static constexpr std::uint32_t kMulA = 0xD2511F53;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Identifies one independent stream.
struct StreamKey {
  std::uint64_t master_seed = 0;
  std::uint64_t cell = 0;
  std::uint64_t replication = 0;
};

/// Sequential uniform and normal draws from one Philox stream. The 128-bit
/// counter holds (replication, block index); the key mixes seed and cell.
class Stream {
 public:
  explicit Stream(const StreamKey& id) {
    const std::uint64_t k = splitmix64(id.master_seed ^ splitmix64(id.cell + 0x632BE59BD9B4E019ULL));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    replication_ = id.replication;
  }

  std::uint32_t next_u32() {
    if (used_ == 4) refill();
    return buffer_[used_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform on (0, 1), 53 bits.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; each pair of uniforms yields two draws.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  void refill() {
    const Philox4x32::Block counter = {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                       static_cast<std::uint32_t>(replication_),
                                       static_cast<std::uint32_t>(replication_ >> 32)};
    buffer_ = Philox4x32::generate(counter, key_);
    ++block_;
    used_ = 0;
  }

  Philox4x32::Key key_{};
  std::uint64_t replication_ = 0;
  std::uint64_t block_ = 0;
  Philox4x32::Block buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rlrt::rng
