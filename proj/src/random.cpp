#include "sofa/random.hpp"

#include <stdexcept>
#include <vector>

namespace sofa {

namespace {

// splitmix64 finalizer; used only to derive child seeds.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t RandomSource::next_u64() { return engine_(); }

std::uint64_t RandomSource::below_u64(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("below_u64: bound must be nonzero");
  // Rejection sampling over the largest multiple of bound.
  const std::uint64_t limit = ~0ULL - (~0ULL % bound);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

mpz_class RandomSource::bits(unsigned bit_count) {
  const unsigned words = (bit_count + 63) / 64;
  mpz_class value = 0;
  for (unsigned i = 0; i < words; ++i) {
    mpz_class word = next_u64();
    mpz_mul_2exp(value.get_mpz_t(), value.get_mpz_t(), 64);
    value += word;
  }
  mpz_fdiv_r_2exp(value.get_mpz_t(), value.get_mpz_t(), bit_count);
  return value;
}

mpz_class RandomSource::below(const mpz_class& bound) {
  if (bound <= 0) throw std::invalid_argument("below: bound must be positive");
  const auto nb = static_cast<unsigned>(mpz_sizeinbase(bound.get_mpz_t(), 2));
  mpz_class x;
  do {
    x = bits(nb);
  } while (x >= bound);
  return x;
}

mpz_class RandomSource::prime(unsigned bit_count) {
  if (bit_count < 2) throw std::invalid_argument("prime: bit_count must be >= 2");
  for (;;) {
    mpz_class start = bits(bit_count);
    mpz_setbit(start.get_mpz_t(), bit_count - 1);
    mpz_class p;
    mpz_nextprime(p.get_mpz_t(), start.get_mpz_t());
    // Redraw on the rare wrap past 2^bit_count.
    if (mpz_sizeinbase(p.get_mpz_t(), 2) == bit_count) return p;
  }
}

RandomSource RandomSource::fork(std::uint64_t stream) const {
  return RandomSource(mix64(seed_ ^ mix64(stream + 1)));
}

}  // namespace sofa
