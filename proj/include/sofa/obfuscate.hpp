#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "sofa/ges.hpp"
#include "sofa/rules.hpp"

namespace sofa {

enum class Scheme { naive, basic, blocking, dnc };

const char* to_string(Scheme scheme);
Scheme scheme_from_string(std::string_view name);

struct EncodingPair {
  Encoding u;
  Encoding v;
};

/// Two level-1 encoding pairs, one per bit value, hiding ratios
/// v0/u0 and v1/u1. Wildcard-compatible units hide equal ratios.
struct EncodingPairUnit {
  EncodingPair bit0;
  EncodingPair bit1;

  const EncodingPair& side(std::uint8_t bit) const { return bit ? bit1 : bit0; }
};

/// Per-rule ciphertexts. `last` is the aggregate pair whose hidden ratio
/// binds the rule's expected bits (or field constants) together.
struct NaiveRule {
  std::vector<EncodingPairUnit> units;  // one unit per bit
  EncodingPair last;
};

struct BasicRule {
  std::vector<std::uint32_t> pr;  // indexes into the shared units array
  EncodingPair last;
};

struct BlockingRule {
  std::vector<std::vector<EncodingPair>> fields;  // fields[i][j], j over the field domain
  EncodingPair last;
};

using ObfuscatedRule = std::variant<NaiveRule, BasicRule, BlockingRule>;

/// Unit pool sizes for the basic scheme. equal_units (M) bounds wildcard
/// positions per rule, unequal_units (N) bounds non-wildcard positions;
/// both must cover the worst rule for without-replacement sampling.
struct BasicSchemeConfig {
  std::uint32_t equal_units = 0;
  std::uint32_t unequal_units = 0;
};

/// One graded-encoding instance together with the rule payloads living in
/// it. Single-instance schemes have one part; the divide-and-conquer
/// scheme has one per bit slice, each with its own zero-test parameter.
struct FirewallPart {
  Scheme scheme = Scheme::naive;
  std::uint32_t bit_offset = 0;
  std::uint32_t width = 0;  // bits covered (naive/basic) or field count (blocking)
  std::shared_ptr<const Ges> ges;
  ZeroTestParam pzt;
  std::vector<EncodingPairUnit> units;  // basic only: the shared array
  std::vector<ObfuscatedRule> rules;
};

/// The published artifact: public parameters, zero tests and ciphertexts.
/// Holds no secret keys, no unit classification, and no plaintext rules.
struct ObfuscatedFirewall {
  Scheme scheme = Scheme::naive;
  Scheme inner = Scheme::naive;  // dnc only
  std::optional<Mode> mode;      // packet view; nullopt = raw bit vectors
  std::uint32_t width = 0;       // total bits of the covered view
  std::optional<FieldLayout> layout;  // blocking only
  std::vector<Action> actions;        // one per rule, in priority order
  Action default_action = make_action(ActionKind::deny);
  std::vector<FirewallPart> parts;

  std::size_t rule_count() const noexcept { return actions.size(); }
};

/// Knobs shared by all builders.
struct ObfuscateContext {
  std::uint32_t lambda = 12;
  Backend backend = Backend::transparent;
  Action default_action = make_action(ActionKind::deny);
  std::optional<Mode> mode;
  std::uint32_t blocking_domain_cap = 4096;  // max sum of field domains per rule
  OpCounter* counter = nullptr;
};

/// Per-bit pairs for every rule plus one aggregate pair; kappa = n+1.
ObfuscatedFirewall obfuscate_naive(const std::vector<BitRule>& rules,
                                   const ObfuscateContext& ctx, RandomSource& rng);

/// Shared unit pool: M equal-ratio and N unequal-ratio units, shuffled;
/// each rule publishes an index array drawn without replacement from the
/// secret equal/unequal classes plus one aggregate pair; kappa = n+1.
/// The classification is discarded once the artifact is built.
ObfuscatedFirewall obfuscate_basic(const std::vector<BitRule>& rules,
                                   const BasicSchemeConfig& config,
                                   const ObfuscateContext& ctx, RandomSource& rng);

/// Per-field encoding tables over the layout domains; within a field every
/// filtered value hides the same constant ratio; kappa = k+1.
ObfuscatedFirewall obfuscate_blocking(const std::vector<BlockRuleSpec>& rules,
                                      const FieldLayout& layout, const ObfuscateContext& ctx,
                                      RandomSource& rng);

/// Splits rules into `parts` bit slices, each obfuscated by the inner
/// scheme (naive or basic) under its own instance. By default the part
/// count must divide the width; with allow_remainder the last part takes
/// the leftover bits.
ObfuscatedFirewall obfuscate_dnc(const std::vector<BitRule>& rules, std::uint32_t parts,
                                 Scheme inner, const ObfuscateContext& ctx, RandomSource& rng,
                                 bool allow_remainder = false,
                                 const std::optional<BasicSchemeConfig>& inner_config = {});

namespace testing {

/// Basic-scheme variant that samples unit indexes WITH replacement.
/// Exists only to demonstrate the false positives the shipped
/// without-replacement path eliminates; never used by the CLI.
ObfuscatedFirewall obfuscate_basic_with_replacement(const std::vector<BitRule>& rules,
                                                    const BasicSchemeConfig& config,
                                                    const ObfuscateContext& ctx,
                                                    RandomSource& rng);

}  // namespace testing

}  // namespace sofa
