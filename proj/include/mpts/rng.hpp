#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace mpts {

/// SplitMix64 finalizer; used for seeding and stream derivation.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// xoshiro256** generator seeded through SplitMix64.
///
/// The integer stream is fully specified and identical on every platform.
/// Derived streams are keyed by (master seed, purpose tag, indices): the tag
/// is hashed with 64-bit FNV-1a and each index is folded in with a SplitMix64
/// round, so e.g. ("train", repeat, round) and ("acquire", repeat, round)
/// never share a stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept;

  /// Independent stream for a given purpose under a master seed.
  static Rng derive(std::uint64_t master, std::string_view purpose,
                    std::initializer_list<std::uint64_t> indices = {}) noexcept;
  static std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                   std::initializer_list<std::uint64_t> indices = {}) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform integer in [0, n); n must be > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Standard normal via the Marsaglia polar method (caches the spare deviate).
  double normal() noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mpts
