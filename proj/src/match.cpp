#include "sofa/match.hpp"

#include <stdexcept>
#include <thread>

#include "sofa/errors.hpp"

namespace sofa {

namespace {

// Algorithm core for the bit schemes: multiply the picked encodings into
// the two level-kappa products and zero-test LHS - RHS.
bool pair_products_match(const GesOps& ops, const ZeroTestParam& pzt, const EncodingPair& last,
                         const std::vector<const EncodingPair*>& picked) {
  const auto kappa = ops.pub->kappa();
  if (picked.size() + 1 != kappa) {
    throw IntegrityError("firewall level budget does not match its rule payload");
  }
  Encoding lhs = last.u;
  Encoding rhs = last.v;
  for (const auto* pair : picked) {
    lhs = ops.mul(lhs.level, lhs, 1, pair->v);
    rhs = ops.mul(rhs.level, rhs, 1, pair->u);
  }
  Encoding diff = ops.sub(kappa, lhs, rhs);
  return ops.is_zero(pzt, diff);
}

bool match_part(const FirewallPart& part, const std::optional<FieldLayout>& layout,
                std::size_t rule_index, const PacketView& view, OpCounter* counter) {
  GesOps ops{part.ges.get(), nullptr, counter};
  std::vector<const EncodingPair*> picked;

  switch (part.scheme) {
    case Scheme::naive: {
      const auto& rule = std::get<NaiveRule>(part.rules.at(rule_index));
      picked.reserve(part.width);
      for (std::uint32_t i = 0; i < part.width; ++i) {
        const std::uint8_t bit = view.bits.at(part.bit_offset + i);
        picked.push_back(&rule.units[i].side(bit));
      }
      return pair_products_match(ops, part.pzt, rule.last, picked);
    }
    case Scheme::basic: {
      const auto& rule = std::get<BasicRule>(part.rules.at(rule_index));
      picked.reserve(part.width);
      for (std::uint32_t i = 0; i < part.width; ++i) {
        const std::uint8_t bit = view.bits.at(part.bit_offset + i);
        picked.push_back(&part.units.at(rule.pr[i]).side(bit));
      }
      return pair_products_match(ops, part.pzt, rule.last, picked);
    }
    case Scheme::blocking: {
      const auto& rule = std::get<BlockingRule>(part.rules.at(rule_index));
      if (!layout) throw IntegrityError("blocking firewall without a layout");
      picked.reserve(rule.fields.size());
      for (std::size_t i = 0; i < rule.fields.size(); ++i) {
        picked.push_back(&rule.fields[i].at(view.tuple.at(i)));
      }
      return pair_products_match(ops, part.pzt, rule.last, picked);
    }
    case Scheme::dnc:
      break;
  }
  throw IntegrityError("malformed firewall part");
}

}  // namespace

PacketView make_view_bits(const ObfuscatedFirewall& fw, std::vector<std::uint8_t> bits) {
  if (bits.size() != fw.width) {
    throw InputError("packet view has " + std::to_string(bits.size()) + " bits, firewall covers " +
                     std::to_string(fw.width));
  }
  PacketView view;
  view.bits = std::move(bits);
  if (fw.scheme == Scheme::blocking) {
    if (!fw.layout) throw IntegrityError("blocking firewall without a layout");
    view.tuple = tuple_from_bits(view.bits, *fw.layout);
  }
  return view;
}

PacketView make_view(const ObfuscatedFirewall& fw, const PacketHeader& packet) {
  if (!fw.mode) {
    throw InputError("firewall covers a raw bit region; packets need an explicit bit view");
  }
  return make_view_bits(fw, packet_bits(packet, *fw.mode));
}

bool match_rule(const ObfuscatedFirewall& fw, std::size_t rule_index, const PacketView& view,
                OpCounter* counter) {
  if (rule_index >= fw.rule_count()) throw std::invalid_argument("match_rule: rule index");
  // dnc: every part must agree; stop at the first failing one.
  for (const auto& part : fw.parts) {
    if (!match_part(part, fw.layout, rule_index, view, counter)) return false;
  }
  return true;
}

bool match_rule(const ObfuscatedFirewall& fw, std::size_t rule_index, const PacketHeader& packet,
                OpCounter* counter) {
  return match_rule(fw, rule_index, make_view(fw, packet), counter);
}

MatchDecision filter_view(const ObfuscatedFirewall& fw, const PacketView& view,
                          OpCounter* counter) {
  for (std::size_t r = 0; r < fw.rule_count(); ++r) {
    if (match_rule(fw, r, view, counter)) return MatchDecision{fw.actions[r], r};
  }
  return MatchDecision{fw.default_action, std::nullopt};
}

MatchDecision filter_packet(const ObfuscatedFirewall& fw, const PacketHeader& packet,
                            OpCounter* counter) {
  return filter_view(fw, make_view(fw, packet), counter);
}

std::vector<MatchDecision> filter_stream(const ObfuscatedFirewall& fw,
                                         const std::vector<PacketHeader>& packets,
                                         unsigned threads, OpCounter* counter) {
  std::vector<MatchDecision> decisions(packets.size(),
                                       MatchDecision{fw.default_action, std::nullopt});
  if (threads <= 1 || packets.size() < 2) {
    for (std::size_t i = 0; i < packets.size(); ++i) {
      decisions[i] = filter_packet(fw, packets[i], counter);
    }
    return decisions;
  }

  const unsigned worker_count = std::min<unsigned>(threads, packets.size());
  std::vector<OpCounter> worker_counters(worker_count);
  std::vector<std::thread> workers;
  workers.reserve(worker_count);
  for (unsigned w = 0; w < worker_count; ++w) {
    workers.emplace_back([&, w] {
      OpCounter* local = counter ? &worker_counters[w] : nullptr;
      for (std::size_t i = w; i < packets.size(); i += worker_count) {
        decisions[i] = filter_packet(fw, packets[i], local);
      }
    });
  }
  for (auto& t : workers) t.join();
  if (counter) {
    for (const auto& c : worker_counters) counter->merge(c);
  }
  return decisions;
}

bool oracle_match(const BitRule& rule, const std::vector<std::uint8_t>& bits) {
  if (bits.size() != rule.n()) throw std::invalid_argument("oracle_match: width mismatch");
  for (std::uint32_t i = 0; i < rule.n(); ++i) {
    if (!rule.wild[i] && bits[i] != rule.v[i]) return false;
  }
  return true;
}

bool oracle_match(const BlockRuleSpec& rule, const std::vector<std::uint32_t>& tuple) {
  if (tuple.size() != rule.filters.size()) {
    throw std::invalid_argument("oracle_match: field count mismatch");
  }
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    if (!rule.field_admits(i, tuple[i])) return false;
  }
  return true;
}

MatchDecision oracle_filter(const std::vector<BitRule>& rules,
                            const std::vector<std::uint8_t>& bits,
                            const Action& default_action) {
  for (std::size_t r = 0; r < rules.size(); ++r) {
    if (oracle_match(rules[r], bits)) return MatchDecision{rules[r].action, r};
  }
  return MatchDecision{default_action, std::nullopt};
}

MatchDecision oracle_filter(const std::vector<BlockRuleSpec>& rules,
                            const std::vector<std::uint32_t>& tuple,
                            const Action& default_action) {
  for (std::size_t r = 0; r < rules.size(); ++r) {
    if (oracle_match(rules[r], tuple)) return MatchDecision{rules[r].action, r};
  }
  return MatchDecision{default_action, std::nullopt};
}

}  // namespace sofa
