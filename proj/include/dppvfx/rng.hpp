#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace dppvfx {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// The 64-bit seed is the Philox key; the 128-bit counter is split into a
/// 64-bit stream id and a 64-bit block index, so `(seed, stream)` names an
/// independent, reproducible sequence. Each block yields two 64-bit words.
/// Satisfies UniformRandomBitGenerator.
class Philox {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform double in the open interval (0, 1), 53 random bits.
  double uniform() noexcept;

  /// Uniform integer in [0, bound), bound > 0 (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t bound) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t blocks_consumed() const noexcept { return block_; }

  /// Generator for another stream under the same seed, starting at block 0.
  Philox fork(std::uint64_t stream) const noexcept { return Philox(seed_, stream); }

  /// The raw bijection: ten Philox rounds of `counter` under `key`.
  static Block encrypt(Block counter, std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
};

/// Poisson variate. Inversion by sequential search for mean < 30, Hörmann's
/// PTRS transformed rejection otherwise. Exact in distribution either way.
std::uint64_t poisson(Philox& rng, double mean);

}  // namespace dppvfx
