#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <random>

namespace sofa {

/// Deterministic randomness for the whole library. Identical seeds yield
/// identical output streams on every platform: the engine is the
/// standardized mt19937_64 and all bounded/big-integer sampling is done
/// here by rejection, never through implementation-defined distributions.
///
/// Every operation that needs randomness takes a RandomSource explicitly;
/// there is no global state. Each thread of a parallel computation owns
/// its own source, obtained with fork().
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();

  /// Uniform in [0, bound). bound must be nonzero.
  std::uint64_t below_u64(std::uint64_t bound);

  /// Uniform in [0, 2^bit_count).
  mpz_class bits(unsigned bit_count);

  /// Uniform in [0, bound). bound must be positive.
  mpz_class below(const mpz_class& bound);

  /// Random prime with exactly bit_count bits (top bit set). bit_count >= 2.
  mpz_class prime(unsigned bit_count);

  /// Child stream derived from this source's seed and the stream id, not
  /// from its current state. Forking is therefore independent of how much
  /// the parent has consumed, so serial and parallel consumers of the same
  /// stream ids draw identical values.
  RandomSource fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace sofa
