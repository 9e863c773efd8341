#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <vector>

#include "sofa/digest.hpp"
#include "sofa/op_counter.hpp"
#include "sofa/random.hpp"

namespace sofa {

enum class Backend { transparent, clt };

const char* to_string(Backend backend);

/// A leveled encoding of a hidden ring element. `payload` is canonical for
/// its backend: reduced mod q (transparent) or mod x0 (clt). `noise_bits`
/// is an upper bound on the bit length of the clt noise numerator, carried
/// for budget bookkeeping; it is always 0 on the transparent backend.
struct Encoding {
  std::uint32_t level = 0;
  mpz_class payload;
  std::uint32_t noise_bits = 0;
};

/// Element of the plaintext ring: a single residue mod q (transparent) or
/// one residue per secret plaintext modulus (clt).
struct RingElement {
  std::vector<mpz_class> residues;

  bool is_zero() const noexcept {
    for (const auto& r : residues)
      if (r != 0) return false;
    return true;
  }

  bool operator==(const RingElement&) const = default;
};

/// Public value enabling zero testing at level kappa, nothing below.
struct ZeroTestParam {
  mpz_class value;
  /// clt only: measured bit gap between zero and nonzero test values at
  /// instance generation. 0 when unknown (e.g. loaded from disk).
  int calibration_margin = 0;
};

/// Public half of a graded encoding instance: everything the evaluating
/// party holds. Arithmetic and zero testing need no secrets; sampling,
/// encoding and re-randomization live on GesSecret.
///
/// Instances are immutable after construction and all operations are pure
/// functions of their inputs, so concurrent use from many threads is safe.
class Ges {
 public:
  virtual ~Ges() = default;

  virtual Backend backend() const noexcept = 0;
  std::uint32_t kappa() const noexcept { return kappa_; }
  const mpz_class& modulus() const noexcept { return modulus_; }

  /// Encodes a1 + a2 at the same level. Operand levels must equal `level`.
  Encoding add(std::uint32_t level, const Encoding& a, const Encoding& b) const;
  /// Encodes -a at the same level.
  Encoding neg(std::uint32_t level, const Encoding& a) const;
  /// add(a, neg(b)); encodes a1 - a2.
  Encoding sub(std::uint32_t level, const Encoding& a, const Encoding& b) const;
  /// Encodes a1 * a2 at level level_a + level_b, which must not exceed kappa.
  Encoding mul(std::uint32_t level_a, const Encoding& a, std::uint32_t level_b,
               const Encoding& b) const;

  /// True iff `e` encodes the ring zero. Requires e.level == kappa.
  virtual bool is_zero(const ZeroTestParam& pzt, const Encoding& e) const = 0;

  /// Canonical digest of the encoded ring element. Requires e.level == kappa.
  /// Encodings of equal elements yield equal digests.
  virtual Digest extract(const ZeroTestParam& pzt, const Encoding& e) const = 0;

 protected:
  Ges(std::uint32_t kappa, mpz_class modulus);

  void require_top_level(const Encoding& e, const char* op) const;

  std::uint32_t kappa_;
  mpz_class modulus_;
};

/// Secret half of an instance: held by the party that builds artifacts,
/// never shipped. Also hosts the known-plaintext helpers the test oracles
/// use (encode_element / decode), which likewise require the secret key.
class GesSecret {
 public:
  virtual ~GesSecret() = default;

  virtual Backend backend() const noexcept = 0;
  virtual const Ges& pub() const noexcept = 0;

  /// Level-0 encoding of a (nearly) uniform ring element.
  virtual Encoding samp(RandomSource& rng) const = 0;

  /// Level target_level in [1, kappa] encoding of the same element.
  virtual Encoding encode(std::uint32_t target_level, const Encoding& level0,
                          RandomSource& rng) const = 0;

  /// Fresh encoding of the same element at the same level. e.level must
  /// equal `level`.
  virtual Encoding re_rand(std::uint32_t level, const Encoding& e,
                           RandomSource& rng) const = 0;

  /// Uniform plaintext ring element.
  virtual RingElement sample_element(RandomSource& rng) const = 0;

  /// Encoding of a chosen element at a chosen level in [0, kappa].
  virtual Encoding encode_element(std::uint32_t level, const RingElement& element,
                                  RandomSource& rng) const = 0;

  /// Exact plaintext of an encoding (test oracle).
  virtual RingElement decode(const Encoding& e) const = 0;

  /// Ring operations on plaintext elements (test oracle).
  virtual RingElement mul_elements(const RingElement& a, const RingElement& b) const = 0;
  virtual RingElement zero_element() const = 0;
  /// Image of an integer under the canonical map Z -> R. Mirrored across
  /// backends: products and sums of embedded integers stay mirrored.
  virtual RingElement embed(const mpz_class& value) const = 0;
};

/// One generated instance: public side, zero-test parameter, secret side.
struct GesInstance {
  std::shared_ptr<const Ges> pub;
  ZeroTestParam pzt;
  std::shared_ptr<const GesSecret> secret;
};

/// Instance generation. lambda >= 1, kappa >= 1. All randomness comes from
/// `rng`; fixed seeds reproduce instances bit for bit.
GesInstance inst_gen(std::uint32_t lambda, std::uint32_t kappa, Backend backend,
                     RandomSource& rng);

GesInstance transparent_inst_gen(std::uint32_t lambda, std::uint32_t kappa,
                                 RandomSource& rng);

/// Transparent instance over an explicit prime modulus (used by tests that
/// need small exhaustive rings).
GesInstance transparent_instance_with_modulus(std::uint32_t kappa, mpz_class q);

/// Public transparent instance reconstructed from stored parameters.
std::shared_ptr<const Ges> transparent_public(std::uint32_t kappa, mpz_class q);

/// Procedure facade that tallies every invocation into an optional
/// OpCounter. Obfuscation and matching go through this so measured
/// operation counts are exact. `secret` is null on the evaluating side.
struct GesOps {
  const Ges* pub = nullptr;
  const GesSecret* secret = nullptr;
  OpCounter* counter = nullptr;

  Encoding samp(RandomSource& rng) const;
  Encoding encode(std::uint32_t target_level, const Encoding& level0, RandomSource& rng) const;
  Encoding re_rand(std::uint32_t level, const Encoding& e, RandomSource& rng) const;
  /// encode to level 1 then re-randomize: the shape every published
  /// encoding goes through.
  Encoding publish1(const Encoding& level0, RandomSource& rng) const;
  Encoding add(std::uint32_t level, const Encoding& a, const Encoding& b) const;
  Encoding neg(std::uint32_t level, const Encoding& a) const;
  Encoding sub(std::uint32_t level, const Encoding& a, const Encoding& b) const;
  Encoding mul(std::uint32_t level_a, const Encoding& a, std::uint32_t level_b,
               const Encoding& b) const;
  bool is_zero(const ZeroTestParam& pzt, const Encoding& e) const;
  Digest extract(const ZeroTestParam& pzt, const Encoding& e) const;
};

}  // namespace sofa
