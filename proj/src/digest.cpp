#include "sofa/digest.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace sofa {

Digest sha256(const void* data, std::size_t size) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data, size, out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw std::runtime_error("sha256 failed");
  }
  return out;
}

Digest sha256(const std::vector<std::uint8_t>& bytes) {
  return sha256(bytes.data(), bytes.size());
}

Digest sha256(const mpz_class& value) {
  const auto bytes = mpz_bytes(value);
  return sha256(bytes.data(), bytes.size());
}

std::string to_hex(const Digest& digest) {
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(digest.size() * 2);
  for (std::uint8_t b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

std::vector<std::uint8_t> mpz_bytes(const mpz_class& value) {
  if (sgn(value) < 0) throw std::invalid_argument("mpz_bytes: negative value");
  if (value == 0) return {};
  const std::size_t bytes = (mpz_sizeinbase(value.get_mpz_t(), 2) + 7) / 8;
  std::vector<std::uint8_t> out(bytes);
  std::size_t written = 0;
  mpz_export(out.data(), &written, 1, 1, 1, 0, value.get_mpz_t());
  out.resize(written);
  return out;
}

mpz_class mpz_from_bytes(const std::uint8_t* data, std::size_t size) {
  mpz_class value;
  if (size > 0) mpz_import(value.get_mpz_t(), size, 1, 1, 1, 0, data);
  return value;
}

}  // namespace sofa
