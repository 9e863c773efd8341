#pragma once

#include <gmpxx.h>

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sofa {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(const void* data, std::size_t size);
Digest sha256(const std::vector<std::uint8_t>& bytes);

/// Digest of the big-endian magnitude of a nonnegative integer (zero maps
/// to the digest of the empty string). This is the canonical digest used
/// repo-wide, documented in docs/FORMATS.md.
Digest sha256(const mpz_class& value);

std::string to_hex(const Digest& digest);

/// Big-endian magnitude bytes of a nonnegative integer; empty for zero.
std::vector<std::uint8_t> mpz_bytes(const mpz_class& value);
mpz_class mpz_from_bytes(const std::uint8_t* data, std::size_t size);

}  // namespace sofa
