#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace blockgibbs {

/// Philox4x32-10 counter-based bijection (Salmon et al., Random123).
/// Output is a pure function of (counter, key); there is no hidden state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter apply(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// A random substream addressed by (seed, iteration, tag). Draws advance a
/// private block counter, so the number of variates one substream consumes
/// never shifts any other substream.
class Substream {
 public:
  Substream(std::uint64_t seed, std::uint64_t iteration, std::uint32_t tag) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        iteration_(iteration),
        tag_(tag) {}

  std::uint64_t next_u64() noexcept {
    if (buffered_ == 0) {
      const auto out = Philox4x32::apply(
          {block_++, tag_, static_cast<std::uint32_t>(iteration_),
           static_cast<std::uint32_t>(iteration_ >> 32)},
          key_);
      buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
      buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
      buffered_ = 2;
    }
    return buffer_[2 - buffered_--];
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via the cosine branch of Box-Muller.
  double standard_normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  Philox4x32::Key key_;
  std::uint64_t iteration_;
  std::uint32_t tag_;
  std::uint32_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
};

}  // namespace blockgibbs
