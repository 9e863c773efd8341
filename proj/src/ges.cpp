#include "sofa/ges.hpp"

#include <stdexcept>
#include <string>

#include "sofa/ges_clt.hpp"

namespace sofa {

const char* to_string(Backend backend) {
  switch (backend) {
    case Backend::transparent:
      return "transparent";
    case Backend::clt:
      return "clt";
  }
  return "?";
}

namespace {

void require_level(const Encoding& e, std::uint32_t level, const char* op) {
  if (e.level != level) {
    throw std::invalid_argument(std::string(op) + ": operand level " +
                                std::to_string(e.level) + " does not match stated level " +
                                std::to_string(level));
  }
}

}  // namespace

Ges::Ges(std::uint32_t kappa, mpz_class modulus)
    : kappa_(kappa), modulus_(std::move(modulus)) {
  if (kappa_ < 1) throw std::invalid_argument("ges: kappa must be >= 1");
  if (modulus_ < 2) throw std::invalid_argument("ges: modulus must be >= 2");
}

void Ges::require_top_level(const Encoding& e, const char* op) const {
  if (e.level != kappa_) {
    throw std::invalid_argument(std::string(op) + ": requires a level-" +
                                std::to_string(kappa_) + " encoding, got level " +
                                std::to_string(e.level));
  }
}

Encoding Ges::add(std::uint32_t level, const Encoding& a, const Encoding& b) const {
  require_level(a, level, "add");
  require_level(b, level, "add");
  Encoding out;
  out.level = level;
  out.payload = (a.payload + b.payload) % modulus_;
  if (backend() == Backend::clt) out.noise_bits = std::max(a.noise_bits, b.noise_bits) + 1;
  return out;
}

Encoding Ges::neg(std::uint32_t level, const Encoding& a) const {
  require_level(a, level, "neg");
  Encoding out;
  out.level = level;
  out.payload = a.payload == 0 ? mpz_class(0) : mpz_class(modulus_ - a.payload);
  out.noise_bits = a.noise_bits;
  return out;
}

Encoding Ges::sub(std::uint32_t level, const Encoding& a, const Encoding& b) const {
  return add(level, a, neg(level, b));
}

Encoding Ges::mul(std::uint32_t level_a, const Encoding& a, std::uint32_t level_b,
                  const Encoding& b) const {
  require_level(a, level_a, "mul");
  require_level(b, level_b, "mul");
  if (level_a + level_b > kappa_) {
    throw std::invalid_argument("mul: level overflow (" + std::to_string(level_a) + "+" +
                                std::to_string(level_b) + " > kappa=" + std::to_string(kappa_) +
                                ")");
  }
  Encoding out;
  out.level = level_a + level_b;
  out.payload = (a.payload * b.payload) % modulus_;
  if (backend() == Backend::clt) out.noise_bits = a.noise_bits + b.noise_bits;
  return out;
}

// ---------------------------------------------------------------------------
// Transparent backend: the ring is Z_q for a public prime q and encodings
// carry the ring value itself. Exact by construction; it is the correctness
// oracle every other backend is checked against.

namespace {

class TransparentGes final : public Ges {
 public:
  TransparentGes(std::uint32_t kappa, mpz_class q) : Ges(kappa, std::move(q)) {
    if (mpz_probab_prime_p(modulus_.get_mpz_t(), 30) == 0) {
      throw std::invalid_argument("transparent: modulus must be prime");
    }
  }

  Backend backend() const noexcept override { return Backend::transparent; }

  bool is_zero(const ZeroTestParam&, const Encoding& e) const override {
    require_top_level(e, "is_zero");
    return e.payload == 0;
  }

  Digest extract(const ZeroTestParam&, const Encoding& e) const override {
    require_top_level(e, "extract");
    return sha256(e.payload);
  }
};

class TransparentSecret final : public GesSecret {
 public:
  explicit TransparentSecret(std::shared_ptr<const Ges> pub) : pub_(std::move(pub)) {}

  Backend backend() const noexcept override { return Backend::transparent; }
  const Ges& pub() const noexcept override { return *pub_; }

  Encoding samp(RandomSource& rng) const override {
    Encoding e;
    e.level = 0;
    e.payload = rng.below(pub_->modulus());
    return e;
  }

  Encoding encode(std::uint32_t target_level, const Encoding& level0,
                  RandomSource&) const override {
    if (level0.level != 0) throw std::invalid_argument("encode: input must be level 0");
    if (target_level < 1 || target_level > pub_->kappa()) {
      throw std::invalid_argument("encode: target level out of range [1, kappa]");
    }
    Encoding e = level0;
    e.level = target_level;
    return e;
  }

  // The transparent backend is exact, so re-randomization is the identity
  // on both value and level.
  Encoding re_rand(std::uint32_t level, const Encoding& e, RandomSource&) const override {
    if (e.level != level) throw std::invalid_argument("re_rand: level mismatch");
    return e;
  }

  RingElement sample_element(RandomSource& rng) const override {
    return RingElement{{rng.below(pub_->modulus())}};
  }

  Encoding encode_element(std::uint32_t level, const RingElement& element,
                          RandomSource&) const override {
    if (element.residues.size() != 1) {
      throw std::invalid_argument("encode_element: transparent element has one residue");
    }
    if (level > pub_->kappa()) throw std::invalid_argument("encode_element: level > kappa");
    Encoding e;
    e.level = level;
    mpz_class m = element.residues[0] % pub_->modulus();
    if (m < 0) m += pub_->modulus();
    e.payload = m;
    return e;
  }

  RingElement decode(const Encoding& e) const override { return RingElement{{e.payload}}; }

  RingElement mul_elements(const RingElement& a, const RingElement& b) const override {
    return RingElement{{mpz_class((a.residues.at(0) * b.residues.at(0)) % pub_->modulus())}};
  }

  RingElement zero_element() const override { return RingElement{{mpz_class(0)}}; }

  RingElement embed(const mpz_class& value) const override {
    mpz_class m = value % pub_->modulus();
    if (m < 0) m += pub_->modulus();
    return RingElement{{m}};
  }

 private:
  std::shared_ptr<const Ges> pub_;
};

}  // namespace

std::shared_ptr<const Ges> transparent_public(std::uint32_t kappa, mpz_class q) {
  return std::make_shared<TransparentGes>(kappa, std::move(q));
}

GesInstance transparent_instance_with_modulus(std::uint32_t kappa, mpz_class q) {
  GesInstance inst;
  inst.pub = transparent_public(kappa, std::move(q));
  inst.pzt = ZeroTestParam{};
  inst.secret = std::make_shared<TransparentSecret>(inst.pub);
  return inst;
}

GesInstance transparent_inst_gen(std::uint32_t lambda, std::uint32_t kappa,
                                 RandomSource& rng) {
  if (lambda < 1) throw std::invalid_argument("inst_gen: lambda must be >= 1");
  if (kappa < 1) throw std::invalid_argument("inst_gen: kappa must be >= 1");
  const unsigned bits = std::max(64u, 2 * lambda);
  return transparent_instance_with_modulus(kappa, rng.prime(bits));
}

GesInstance inst_gen(std::uint32_t lambda, std::uint32_t kappa, Backend backend,
                     RandomSource& rng) {
  switch (backend) {
    case Backend::transparent:
      return transparent_inst_gen(lambda, kappa, rng);
    case Backend::clt:
      return clt_inst_gen(lambda, kappa, rng);
  }
  throw std::invalid_argument("inst_gen: unsupported backend id");
}

// ---------------------------------------------------------------------------
// Counting facade.

Encoding GesOps::samp(RandomSource& rng) const {
  if (counter) ++counter->samp;
  return secret->samp(rng);
}

Encoding GesOps::encode(std::uint32_t target_level, const Encoding& level0,
                        RandomSource& rng) const {
  if (counter) ++counter->encode;
  return secret->encode(target_level, level0, rng);
}

Encoding GesOps::re_rand(std::uint32_t level, const Encoding& e, RandomSource& rng) const {
  if (counter) ++counter->re_rand;
  return secret->re_rand(level, e, rng);
}

Encoding GesOps::publish1(const Encoding& level0, RandomSource& rng) const {
  return re_rand(1, encode(1, level0, rng), rng);
}

Encoding GesOps::add(std::uint32_t level, const Encoding& a, const Encoding& b) const {
  if (counter) ++counter->add;
  return pub->add(level, a, b);
}

Encoding GesOps::neg(std::uint32_t level, const Encoding& a) const {
  if (counter) ++counter->neg;
  return pub->neg(level, a);
}

Encoding GesOps::sub(std::uint32_t level, const Encoding& a, const Encoding& b) const {
  // sub is add-of-negation; counted as such.
  return add(level, a, neg(level, b));
}

Encoding GesOps::mul(std::uint32_t level_a, const Encoding& a, std::uint32_t level_b,
                     const Encoding& b) const {
  if (counter) ++counter->mul;
  return pub->mul(level_a, a, level_b, b);
}

bool GesOps::is_zero(const ZeroTestParam& pzt, const Encoding& e) const {
  if (counter) ++counter->is_zero;
  return pub->is_zero(pzt, e);
}

Digest GesOps::extract(const ZeroTestParam& pzt, const Encoding& e) const {
  if (counter) ++counter->extract;
  return pub->extract(pzt, e);
}

}  // namespace sofa
