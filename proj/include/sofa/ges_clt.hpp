#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <vector>

#include "sofa/ges.hpp"
#include "sofa/random.hpp"

namespace sofa {

/// Sizing knobs for clt instance generation. Zeros mean "derive the
/// default": t = max(8, kappa) and eta from the noise schedule
/// max(160, nu + kappa*(2*rho_noise + alpha_bits) + 32). The schedule is a
/// starting point, not a guarantee: instances are calibrated empirically
/// and regenerated with a larger eta until the zero/nonzero gap holds.
struct CltParams {
  std::uint32_t rho_noise = 16;
  std::uint32_t alpha_bits = 16;
  std::uint32_t nu = 24;
  std::uint32_t t = 0;
  std::uint32_t eta = 0;
  std::uint32_t h_bits = 8;
  std::uint32_t max_attempts = 5;
};

/// Public side of a clt instance. Only x0, kappa and nu are needed to
/// evaluate; the sizing fields are informational and zero when the
/// instance was reconstructed from stored parameters.
struct CltPublicParams {
  mpz_class x0;
  std::uint32_t kappa = 0;
  std::uint32_t nu = 0;
  std::uint32_t t = 0;
  std::uint32_t eta = 0;
  std::uint32_t alpha_bits = 0;
  std::uint32_t rho_noise = 0;
};

/// Graded encodings over the integers: payloads live mod x0 = p_1...p_t,
/// where a level-k encoding of residues (m_1,...,m_t) satisfies
///   c = (r_i*g_i + m_i) * z^-k  (mod p_i)
/// for small noise r_i. The zero-test parameter folds z^kappa and g_i^-1
/// back in, so for level-kappa encodings of zero the product pzt*c mod x0
/// is small; for anything else it looks uniform.
class CltGes final : public Ges {
 public:
  explicit CltGes(CltPublicParams params);

  Backend backend() const noexcept override { return Backend::clt; }
  const CltPublicParams& params() const noexcept { return params_; }
  std::uint32_t nu() const noexcept { return params_.nu; }

  bool is_zero(const ZeroTestParam& pzt, const Encoding& e) const override;
  Digest extract(const ZeroTestParam& pzt, const Encoding& e) const override;

  /// Bit length of the centered zero-test value pzt*payload mod x0.
  /// Classification compares it against bitlen(x0) - nu.
  std::size_t test_value_bits(const ZeroTestParam& pzt, const Encoding& e) const;
  std::size_t x0_bits() const noexcept { return x0_bits_; }

 private:
  CltPublicParams params_;
  mpz_class half_x0_;
  std::size_t x0_bits_;
};

class CltSecret final : public GesSecret {
 public:
  CltSecret(std::shared_ptr<const CltGes> pub, std::vector<mpz_class> primes,
            std::vector<mpz_class> plaintext_moduli, mpz_class z);

  Backend backend() const noexcept override { return Backend::clt; }
  const Ges& pub() const noexcept override { return *pub_; }
  const CltGes& clt_pub() const noexcept { return *pub_; }

  Encoding samp(RandomSource& rng) const override;
  Encoding encode(std::uint32_t target_level, const Encoding& level0,
                  RandomSource& rng) const override;
  Encoding re_rand(std::uint32_t level, const Encoding& e, RandomSource& rng) const override;

  RingElement sample_element(RandomSource& rng) const override;
  Encoding encode_element(std::uint32_t level, const RingElement& element,
                          RandomSource& rng) const override;
  RingElement decode(const Encoding& e) const override;
  RingElement mul_elements(const RingElement& a, const RingElement& b) const override;
  RingElement zero_element() const override;
  RingElement embed(const mpz_class& value) const override;

  /// Encoding of `element` at `level` with fresh noise of noise_bits bits
  /// per residue. Rejects noise that cannot survive the zero-test budget.
  Encoding encode_with_noise(std::uint32_t level, const RingElement& element,
                             std::uint32_t noise_bits, RandomSource& rng) const;

  /// Zero-test parameter sum h_i * (z^kappa * g_i^-1 mod p_i) * (x0/p_i).
  ZeroTestParam make_zero_test(RandomSource& rng, std::uint32_t h_bits) const;

  const std::vector<mpz_class>& plaintext_moduli() const noexcept { return g_; }

 private:
  std::shared_ptr<const CltGes> pub_;
  std::vector<mpz_class> p_;
  std::vector<mpz_class> g_;
  mpz_class z_;
  std::vector<mpz_class> z_inv_pow_;  // z^-k mod x0 for k in [0, kappa]
  std::vector<mpz_class> crt_basis_;  // (x0/p_i) * ((x0/p_i)^-1 mod p_i) mod x0
};

/// Instance generation with empirical zero-test calibration: 32 known-zero
/// and 32 known-nonzero level-kappa values shaped like the worst case the
/// schemes produce must classify correctly with >= 8 bits of headroom,
/// otherwise the instance is regenerated with a larger eta. Throws
/// CalibrationError after the retry budget, reporting what was tried.
GesInstance clt_inst_gen(std::uint32_t lambda, std::uint32_t kappa, RandomSource& rng,
                         const CltParams& config = {});

/// Level encoding of chosen residues with chosen noise (secret-side
/// primitive; the known-plaintext oracle for clt tests).
Encoding clt_encode_level(const GesSecret& secret, std::uint32_t level,
                          const RingElement& residues, std::uint32_t noise_bits,
                          RandomSource& rng);

/// Public clt instance reconstructed from stored parameters.
std::shared_ptr<const Ges> clt_public(CltPublicParams params);

}  // namespace sofa
