#pragma once

// Counter-based random streams. Every replica draws from its own stream
// keyed by (seed, replica, role), so results do not depend on how replicas
// are scheduled across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace ctrw {

/// Philox4x32 with 10 rounds (Salmon et al. counter-based generator).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter bijection(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Identifies one independent stream.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::uint32_t role = 0;
};

/// UniformRandomBitGenerator producing 64-bit words from a Philox stream.
///
/// Key words hold the seed; the counter holds (block, role, replica).
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(StreamKey key)
      : key_{static_cast<std::uint32_t>(key.seed), static_cast<std::uint32_t>(key.seed >> 32)},
        role_(key.role),
        replica_(key.replica) {}

  RandomStream(std::uint64_t seed, std::uint64_t replica, std::uint32_t role = 0)
      : RandomStream(StreamKey{seed, replica, role}) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (used_ == 2) refill();
    const std::size_t k = 2 * used_++;
    return (static_cast<std::uint64_t>(buffer_[k]) << 32) | buffer_[k + 1];
  }

  /// Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard exponential variate.
  double exponential() { return -std::log(uniform_open()); }

  std::uint64_t blocks_used() const { return block_; }

 private:
  void refill() {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_),
                                  static_cast<std::uint32_t>(block_ >> 32) ^ role_,
                                  static_cast<std::uint32_t>(replica_),
                                  static_cast<std::uint32_t>(replica_ >> 32)};
    buffer_ = Philox4x32::bijection(ctr, key_);
    ++block_;
    used_ = 0;
  }

  Philox4x32::Key key_;
  std::uint32_t role_;
  std::uint64_t replica_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  std::size_t used_ = 2;
};

}  // namespace ctrw
