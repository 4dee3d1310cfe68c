#pragma once
// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A stream is identified by (seed, stream id). Draw k of a stream encrypts
// the counter (k_lo, k_hi, stream_lo, stream_hi) under the key
// (seed_lo, seed_hi), so any draw of any stream can be computed without
// touching the others.

#include <array>
#include <cstdint>

namespace confscore {

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Ten rounds of Philox4x32 with multipliers 0xD2511F53, 0xCD9E8D57 and
/// Weyl key increments 0x9E3779B9, 0xBB67AE85.
PhiloxBlock philox4x32_10(PhiloxBlock counter, PhiloxKey key);

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// ((u >> 11) + 0.5) * 2^-53, strictly inside (0, 1).
  double uniform();
  /// Inverse-CDF standard normal.
  double normal();

  std::uint64_t position() const { return block_ * 2 + (half_ ? 1 : 0); }

 private:
  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  bool half_ = false;
  PhiloxBlock buffer_{};
};

}  // namespace confscore
