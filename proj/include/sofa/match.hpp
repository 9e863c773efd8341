#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sofa/obfuscate.hpp"
#include "sofa/op_counter.hpp"
#include "sofa/rules.hpp"

namespace sofa {

struct MatchDecision {
  Action action;
  std::optional<std::size_t> rule_index;  // absent: the default action applied

  bool operator==(const MatchDecision&) const = default;
};

/// Packet views precomputed once per (firewall, packet): the bit vector
/// and, for blocking firewalls, the field tuple.
struct PacketView {
  std::vector<std::uint8_t> bits;
  std::vector<std::uint32_t> tuple;
};

PacketView make_view(const ObfuscatedFirewall& fw, const PacketHeader& packet);
PacketView make_view_bits(const ObfuscatedFirewall& fw, std::vector<std::uint8_t> bits);

/// Does the packet satisfy rule `rule_index`? Evaluates the scheme's two
/// level-kappa products and zero-tests their difference; dnc checks parts
/// sequentially and stops at the first failing one.
bool match_rule(const ObfuscatedFirewall& fw, std::size_t rule_index, const PacketView& view,
                OpCounter* counter = nullptr);
bool match_rule(const ObfuscatedFirewall& fw, std::size_t rule_index, const PacketHeader& packet,
                OpCounter* counter = nullptr);

/// First-match scan in priority order; the default action (no index)
/// applies when nothing matches.
MatchDecision filter_packet(const ObfuscatedFirewall& fw, const PacketHeader& packet,
                            OpCounter* counter = nullptr);
MatchDecision filter_view(const ObfuscatedFirewall& fw, const PacketView& view,
                          OpCounter* counter = nullptr);

/// Evaluates a packet stream, optionally across threads. Output order is
/// the input order regardless of the thread count.
std::vector<MatchDecision> filter_stream(const ObfuscatedFirewall& fw,
                                         const std::vector<PacketHeader>& packets,
                                         unsigned threads = 1, OpCounter* counter = nullptr);

// Plaintext reference semantics: the ground truth the obfuscated paths are
// tested against.
bool oracle_match(const BitRule& rule, const std::vector<std::uint8_t>& bits);
bool oracle_match(const BlockRuleSpec& rule, const std::vector<std::uint32_t>& tuple);
MatchDecision oracle_filter(const std::vector<BitRule>& rules,
                            const std::vector<std::uint8_t>& bits, const Action& default_action);
MatchDecision oracle_filter(const std::vector<BlockRuleSpec>& rules,
                            const std::vector<std::uint32_t>& tuple,
                            const Action& default_action);

}  // namespace sofa
