#include "sofa/obfuscate.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "sofa/errors.hpp"
#include "sofa/ges_clt.hpp"

namespace sofa {

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::naive:
      return "naive";
    case Scheme::basic:
      return "basic";
    case Scheme::blocking:
      return "blocking";
    case Scheme::dnc:
      return "dnc";
  }
  return "?";
}

Scheme scheme_from_string(std::string_view name) {
  if (name == "naive") return Scheme::naive;
  if (name == "basic") return Scheme::basic;
  if (name == "blocking") return Scheme::blocking;
  if (name == "dnc") return Scheme::dnc;
  throw InputError("unknown scheme '" + std::string(name) + "'");
}

namespace {

// Stream ids per part: 0 = instance generation, 1 = unit pool,
// 2 + r = rule r. Parts of a divide-and-conquer firewall fork their own
// masters, so per-rule streams depend only on (seed, part, rule index) and
// serial and parallel builds draw identical randomness.
constexpr std::uint64_t kInstanceStream = 0;
constexpr std::uint64_t kUnitStream = 1;
constexpr std::uint64_t kRuleStreamBase = 2;
constexpr std::uint64_t kPartStreamBase = 1000;

std::uint32_t common_width(const std::vector<BitRule>& rules, const ObfuscateContext& ctx,
                           const char* scheme) {
  if (rules.empty()) {
    if (ctx.mode) return mode_bits(*ctx.mode);
    throw InputError(std::string(scheme) + ": cannot size an empty firewall without a mode");
  }
  const std::uint32_t n = rules.front().n();
  if (n == 0) throw InputError(std::string(scheme) + ": rules must have at least one bit");
  for (const auto& r : rules) {
    if (r.n() != n || r.wild.size() != r.v.size()) {
      throw InputError(std::string(scheme) + ": mixed rule widths");
    }
  }
  return n;
}

// Level-0 product of the chosen alpha ratios times a fresh rho; the hidden
// ratio of the aggregate pair.
Encoding aggregate_ratio(const GesOps& ops, const Encoding& rho,
                         const std::vector<const Encoding*>& alphas) {
  if (alphas.empty()) return rho;
  Encoding prod = *alphas[0];
  for (std::size_t i = 1; i < alphas.size(); ++i) prod = ops.mul(0, prod, 0, *alphas[i]);
  return ops.mul(0, rho, 0, prod);
}

EncodingPair publish_pair(const GesOps& ops, const Encoding& rho, const Encoding& ratio,
                          RandomSource& rng) {
  EncodingPair pair;
  pair.u = ops.publish1(rho, rng);
  pair.v = ops.publish1(ratio, rng);
  return pair;
}

FirewallPart build_naive_part(const std::vector<BitRule>& rules, std::uint32_t width,
                              std::uint32_t bit_offset, const ObfuscateContext& ctx,
                              RandomSource part_master) {
  FirewallPart part;
  part.scheme = Scheme::naive;
  part.bit_offset = bit_offset;
  part.width = width;

  RandomSource inst_rng = part_master.fork(kInstanceStream);
  GesInstance inst = inst_gen(ctx.lambda, width + 1, ctx.backend, inst_rng);
  part.ges = inst.pub;
  part.pzt = inst.pzt;
  GesOps ops{inst.pub.get(), inst.secret.get(), ctx.counter};

  part.rules.reserve(rules.size());
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const BitRule& rule = rules[r];
    RandomSource rng = part_master.fork(kRuleStreamBase + r);
    NaiveRule out;
    out.units.reserve(width);
    std::vector<Encoding> picked_alpha;
    picked_alpha.reserve(width);
    for (std::uint32_t i = 0; i < width; ++i) {
      Encoding rho0 = ops.samp(rng);
      Encoding rho1 = ops.samp(rng);
      Encoding alpha0 = ops.samp(rng);
      // Wildcard bits hide the same ratio on both sides.
      Encoding alpha1 = rule.wild[i] ? alpha0 : ops.samp(rng);
      EncodingPairUnit unit;
      unit.bit0 = publish_pair(ops, rho0, ops.mul(0, rho0, 0, alpha0), rng);
      unit.bit1 = publish_pair(ops, rho1, ops.mul(0, rho1, 0, alpha1), rng);
      out.units.push_back(std::move(unit));
      picked_alpha.push_back(rule.v[i] ? alpha1 : alpha0);
    }
    Encoding rho_last = ops.samp(rng);
    std::vector<const Encoding*> refs;
    refs.reserve(width);
    for (const auto& a : picked_alpha) refs.push_back(&a);
    out.last = publish_pair(ops, rho_last, aggregate_ratio(ops, rho_last, refs), rng);
    part.rules.emplace_back(std::move(out));
  }
  return part;
}

FirewallPart build_basic_part(const std::vector<BitRule>& rules, std::uint32_t width,
                              std::uint32_t bit_offset, const BasicSchemeConfig& config,
                              const ObfuscateContext& ctx, RandomSource part_master,
                              bool without_replacement) {
  const std::uint32_t m_units = config.equal_units;
  const std::uint32_t n_units = config.unequal_units;
  for (const auto& rule : rules) {
    const std::uint32_t w = rule.wildcard_count();
    if (without_replacement && w > m_units) {
      throw InputError("basic: M=" + std::to_string(m_units) + " is smaller than a rule's " +
                       std::to_string(w) + " wildcard bits; raise M");
    }
    if (without_replacement && width - w > n_units) {
      throw InputError("basic: N=" + std::to_string(n_units) + " is smaller than a rule's " +
                       std::to_string(width - w) + " non-wildcard bits; raise N");
    }
    if (!without_replacement && ((w > 0 && m_units == 0) || (width - w > 0 && n_units == 0))) {
      throw InputError("basic: empty unit class");
    }
  }

  FirewallPart part;
  part.scheme = Scheme::basic;
  part.bit_offset = bit_offset;
  part.width = width;

  RandomSource inst_rng = part_master.fork(kInstanceStream);
  GesInstance inst = inst_gen(ctx.lambda, width + 1, ctx.backend, inst_rng);
  part.ges = inst.pub;
  part.pzt = inst.pzt;
  GesOps ops{inst.pub.get(), inst.secret.get(), ctx.counter};

  // Unit pool: the first M units hide equal ratios on both sides. The
  // level-0 ratios stay in this builder only; they die with it.
  RandomSource unit_rng = part_master.fork(kUnitStream);
  const std::uint32_t total_units = m_units + n_units;
  std::vector<EncodingPairUnit> units;
  std::vector<std::array<Encoding, 2>> alphas;
  units.reserve(total_units);
  alphas.reserve(total_units);
  for (std::uint32_t i = 0; i < total_units; ++i) {
    Encoding rho0 = ops.samp(unit_rng);
    Encoding rho1 = ops.samp(unit_rng);
    Encoding alpha0 = ops.samp(unit_rng);
    Encoding alpha1 = i < m_units ? alpha0 : ops.samp(unit_rng);
    EncodingPairUnit unit;
    unit.bit0 = publish_pair(ops, rho0, ops.mul(0, rho0, 0, alpha0), unit_rng);
    unit.bit1 = publish_pair(ops, rho1, ops.mul(0, rho1, 0, alpha1), unit_rng);
    units.push_back(std::move(unit));
    alphas.push_back({std::move(alpha0), std::move(alpha1)});
  }

  // Shuffle the pool and collect the secret equal/unequal index classes.
  std::vector<std::uint32_t> order(total_units);
  std::iota(order.begin(), order.end(), 0);
  for (std::uint32_t i = total_units; i > 1; --i) {
    const auto j = static_cast<std::uint32_t>(unit_rng.below_u64(i));
    std::swap(order[i - 1], order[j]);
  }
  part.units.resize(total_units);
  std::vector<std::array<Encoding, 2>> shuffled_alphas(total_units);
  std::vector<std::uint32_t> slot_of(total_units);
  for (std::uint32_t pos = 0; pos < total_units; ++pos) {
    part.units[pos] = std::move(units[order[pos]]);
    shuffled_alphas[pos] = std::move(alphas[order[pos]]);
    slot_of[order[pos]] = pos;
  }
  std::vector<std::uint32_t> equal_slots(slot_of.begin(), slot_of.begin() + m_units);
  std::vector<std::uint32_t> unequal_slots(slot_of.begin() + m_units, slot_of.end());

  part.rules.reserve(rules.size());
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const BitRule& rule = rules[r];
    RandomSource rng = part_master.fork(kRuleStreamBase + r);
    BasicRule out;
    out.pr.resize(width);
    std::vector<std::uint32_t> equal_pool = equal_slots;
    std::vector<std::uint32_t> unequal_pool = unequal_slots;
    for (std::uint32_t i = 0; i < width; ++i) {
      auto& pool = rule.wild[i] ? equal_pool : unequal_pool;
      const auto j = static_cast<std::size_t>(rng.below_u64(pool.size()));
      out.pr[i] = pool[j];
      if (without_replacement) {
        std::swap(pool[j], pool.back());
        pool.pop_back();
      }
    }
    if (without_replacement) {
      assert(std::set<std::uint32_t>(out.pr.begin(), out.pr.end()).size() == out.pr.size());
    }

    Encoding rho_last = ops.samp(rng);
    std::vector<const Encoding*> refs;
    refs.reserve(width);
    for (std::uint32_t i = 0; i < width; ++i) {
      refs.push_back(&shuffled_alphas[out.pr[i]][rule.v[i]]);
    }
    out.last = publish_pair(ops, rho_last, aggregate_ratio(ops, rho_last, refs), rng);
    part.rules.emplace_back(std::move(out));
  }
  return part;
}

FirewallPart build_blocking_part(const std::vector<BlockRuleSpec>& rules,
                                 const FieldLayout& layout, const ObfuscateContext& ctx,
                                 RandomSource part_master) {
  const auto k = static_cast<std::uint32_t>(layout.k());
  if (k == 0) throw InputError("blocking: layout has no fields");
  if (layout.total_domain() > ctx.blocking_domain_cap) {
    throw InputError("blocking: layout domain total " + std::to_string(layout.total_domain()) +
                     " exceeds the cap of " + std::to_string(ctx.blocking_domain_cap));
  }
  for (const auto& rule : rules) {
    if (rule.filters.size() != k) throw InputError("blocking: rule/layout field count mismatch");
    for (std::size_t i = 0; i < k; ++i) {
      if (rule.filters[i].empty()) throw InputError("blocking: empty filter set");
    }
  }

  FirewallPart part;
  part.scheme = Scheme::blocking;
  part.bit_offset = 0;
  part.width = k;

  RandomSource inst_rng = part_master.fork(kInstanceStream);
  GesInstance inst = inst_gen(ctx.lambda, k + 1, ctx.backend, inst_rng);
  part.ges = inst.pub;
  part.pzt = inst.pzt;
  GesOps ops{inst.pub.get(), inst.secret.get(), ctx.counter};

  part.rules.reserve(rules.size());
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const BlockRuleSpec& rule = rules[r];
    RandomSource rng = part_master.fork(kRuleStreamBase + r);
    BlockingRule out;
    out.fields.resize(k);
    std::vector<Encoding> field_constants;
    field_constants.reserve(k);
    for (std::uint32_t i = 0; i < k; ++i) {
      const std::uint32_t domain = layout.domain_size(i);
      std::vector<bool> in_filter(domain, false);
      for (auto value : rule.filters[i]) {
        if (value >= domain) throw InputError("blocking: filter value outside the field domain");
        in_filter[value] = true;
      }
      Encoding eta = ops.samp(rng);
      auto& table = out.fields[i];
      table.reserve(domain);
      for (std::uint32_t j = 0; j < domain; ++j) {
        Encoding beta = ops.samp(rng);
        Encoding alpha = in_filter[j] ? eta : ops.samp(rng);
        table.push_back(publish_pair(ops, beta, ops.mul(0, beta, 0, alpha), rng));
      }
      field_constants.push_back(std::move(eta));
    }
    Encoding rho_last = ops.samp(rng);
    std::vector<const Encoding*> refs;
    refs.reserve(k);
    for (const auto& eta : field_constants) refs.push_back(&eta);
    out.last = publish_pair(ops, rho_last, aggregate_ratio(ops, rho_last, refs), rng);
    part.rules.emplace_back(std::move(out));
  }
  return part;
}

std::vector<Action> collect_actions(const std::vector<BitRule>& rules) {
  std::vector<Action> actions;
  actions.reserve(rules.size());
  for (const auto& r : rules) actions.push_back(r.action);
  return actions;
}

ObfuscatedFirewall basic_firewall(const std::vector<BitRule>& rules,
                                  const BasicSchemeConfig& config, const ObfuscateContext& ctx,
                                  RandomSource& rng, bool without_replacement) {
  const std::uint32_t n = common_width(rules, ctx, "basic");
  ObfuscatedFirewall fw;
  fw.scheme = Scheme::basic;
  fw.mode = ctx.mode;
  fw.width = n;
  fw.actions = collect_actions(rules);
  fw.default_action = ctx.default_action;
  fw.parts.push_back(build_basic_part(rules, n, 0, config, ctx, rng.fork(kPartStreamBase),
                                      without_replacement));
  return fw;
}

}  // namespace

ObfuscatedFirewall obfuscate_naive(const std::vector<BitRule>& rules,
                                   const ObfuscateContext& ctx, RandomSource& rng) {
  const std::uint32_t n = common_width(rules, ctx, "naive");
  ObfuscatedFirewall fw;
  fw.scheme = Scheme::naive;
  fw.mode = ctx.mode;
  fw.width = n;
  fw.actions = collect_actions(rules);
  fw.default_action = ctx.default_action;
  fw.parts.push_back(build_naive_part(rules, n, 0, ctx, rng.fork(kPartStreamBase)));
  return fw;
}

ObfuscatedFirewall obfuscate_basic(const std::vector<BitRule>& rules,
                                   const BasicSchemeConfig& config,
                                   const ObfuscateContext& ctx, RandomSource& rng) {
  return basic_firewall(rules, config, ctx, rng, /*without_replacement=*/true);
}

ObfuscatedFirewall obfuscate_blocking(const std::vector<BlockRuleSpec>& rules,
                                      const FieldLayout& layout, const ObfuscateContext& ctx,
                                      RandomSource& rng) {
  ObfuscatedFirewall fw;
  fw.scheme = Scheme::blocking;
  fw.mode = layout.mode;
  fw.width = layout.covered_bits();
  fw.layout = layout;
  fw.actions.reserve(rules.size());
  for (const auto& r : rules) fw.actions.push_back(r.action);
  fw.default_action = ctx.default_action;
  fw.parts.push_back(build_blocking_part(rules, layout, ctx, rng.fork(kPartStreamBase)));
  return fw;
}

ObfuscatedFirewall obfuscate_dnc(const std::vector<BitRule>& rules, std::uint32_t parts,
                                 Scheme inner, const ObfuscateContext& ctx, RandomSource& rng,
                                 bool allow_remainder,
                                 const std::optional<BasicSchemeConfig>& inner_config) {
  const std::uint32_t n = common_width(rules, ctx, "dnc");
  if (parts == 0 || parts > n) {
    throw InputError("dnc: part count must be in [1, " + std::to_string(n) + "]");
  }
  if (inner != Scheme::naive && inner != Scheme::basic) {
    throw InputError("dnc: inner scheme must be naive or basic");
  }
  if (n % parts != 0 && !allow_remainder) {
    throw InputError("dnc: " + std::to_string(parts) + " parts do not divide " +
                     std::to_string(n) + " bits (pass allow_remainder to absorb the rest)");
  }

  ObfuscatedFirewall fw;
  fw.scheme = Scheme::dnc;
  fw.inner = inner;
  fw.mode = ctx.mode;
  fw.width = n;
  fw.actions = collect_actions(rules);
  fw.default_action = ctx.default_action;

  const std::uint32_t base = n / parts;
  std::uint32_t offset = 0;
  for (std::uint32_t p = 0; p < parts; ++p) {
    const std::uint32_t width = (p + 1 == parts) ? n - offset : base;
    std::vector<BitRule> sliced;
    sliced.reserve(rules.size());
    for (const auto& rule : rules) {
      BitRule s;
      s.action = rule.action;
      s.v.assign(rule.v.begin() + offset, rule.v.begin() + offset + width);
      s.wild.assign(rule.wild.begin() + offset, rule.wild.begin() + offset + width);
      sliced.push_back(std::move(s));
    }
    RandomSource part_master = rng.fork(kPartStreamBase + p);
    if (inner == Scheme::naive) {
      fw.parts.push_back(build_naive_part(sliced, width, offset, ctx, part_master));
    } else {
      BasicSchemeConfig cfg =
          inner_config.value_or(BasicSchemeConfig{2 * width, 2 * width});
      fw.parts.push_back(build_basic_part(sliced, width, offset, cfg, ctx, part_master,
                                          /*without_replacement=*/true));
    }
    offset += width;
  }
  return fw;
}

namespace testing {

ObfuscatedFirewall obfuscate_basic_with_replacement(const std::vector<BitRule>& rules,
                                                    const BasicSchemeConfig& config,
                                                    const ObfuscateContext& ctx,
                                                    RandomSource& rng) {
  return basic_firewall(rules, config, ctx, rng, /*without_replacement=*/false);
}

}  // namespace testing

}  // namespace sofa
