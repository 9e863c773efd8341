#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sofa/random.hpp"

namespace sofa {

enum class ActionKind { permit, deny };

struct Action {
  ActionKind kind = ActionKind::deny;
  std::string raw = "deny";

  bool operator==(const Action&) const = default;
};

Action make_action(ActionKind kind);
Action action_from_token(std::string_view token);  // case-insensitive permit/deny

enum class Proto : std::uint8_t { tcp = 6, udp = 17, icmp = 1, any = 255 };

/// One IPv4 pattern octet: a literal value or a wildcard.
using OctetAtom = std::optional<std::uint8_t>;

struct IpPattern {
  std::array<OctetAtom, 4> octets;

  bool operator==(const IpPattern&) const = default;
};

/// Port atom: wildcard, a literal, or an inclusive range [lo, hi].
struct PortAtom {
  enum class Kind { wildcard, literal, range };
  Kind kind = Kind::wildcard;
  std::uint16_t lo = 0;
  std::uint16_t hi = 65535;

  bool operator==(const PortAtom&) const = default;
};

/// Surface rule as written in the ACL text:
///   <action> <src_ip> <src_port> <dst_ip> <dst_port> <proto>
struct AclRule {
  IpPattern src_ip;
  PortAtom src_port;
  IpPattern dst_ip;
  PortAtom dst_port;
  Proto proto = Proto::any;
  Action action;
  std::size_t line_no = 0;
};

/// Parses ACL text: one rule per line, '#' comments and blank lines
/// skipped, order preserved (priority = position). Malformed octets,
/// inverted ranges and unknown protocol tokens raise ParseError with the
/// offending line number.
std::vector<AclRule> parse_acl(std::string_view text);

std::string format_rule(const AclRule& rule);
std::string format_acl(const std::vector<AclRule>& rules);

/// Bit views of the header. standard covers the source address only;
/// extended covers src_ip | src_port | dst_ip | dst_port | proto.
enum class Mode { standard, extended };

constexpr std::uint32_t kStandardBits = 32;
constexpr std::uint32_t kExtendedBits = 104;

std::uint32_t mode_bits(Mode mode);

/// Bit-level rule: expected bits v (0 on wildcard positions) plus the
/// wildcard position set, stored as a mask. Positions are 0-based from the
/// most significant bit of the covered header region.
struct BitRule {
  std::vector<std::uint8_t> v;
  std::vector<std::uint8_t> wild;
  Action action;

  std::uint32_t n() const noexcept { return static_cast<std::uint32_t>(v.size()); }
  std::uint32_t wildcard_count() const noexcept;
};

/// Compiles a surface rule to bit level. Port atoms that are proper ranges
/// are not bit-expressible and are rejected in extended mode; per-octet IP
/// wildcards are fine (the wildcard set is arbitrary).
BitRule compile_bit(const AclRule& rule, Mode mode);

/// Field layout: an ordered split of a bit region into contiguous fields,
/// each matching on its 2^width integer domain. When `mode` is set the
/// fields cover that header view exactly; raw layouts (no mode) cover a
/// free-standing bit vector.
struct FieldLayout {
  struct Field {
    std::string name;
    std::uint32_t width_bits = 0;
  };

  std::optional<Mode> mode = Mode::standard;
  std::vector<Field> fields;

  std::size_t k() const noexcept { return fields.size(); }
  std::uint32_t domain_size(std::size_t i) const { return 1u << fields.at(i).width_bits; }
  std::uint64_t total_domain() const;
  std::uint32_t bit_offset(std::size_t i) const;
  std::uint32_t covered_bits() const;
};

/// The 4-octet source-address layout (one field per octet).
FieldLayout octet_layout();

/// Block-level rule: one filter set per layout field; a packet matches
/// when every tuple coordinate lies in its field's set.
struct BlockRuleSpec {
  std::vector<std::vector<std::uint32_t>> filters;  // sorted per field
  Action action;

  bool field_admits(std::size_t i, std::uint32_t value) const;
};

/// Compiles a surface rule to block level. The rule's match set must be a
/// per-field cross product under the layout; anything else (e.g. a port
/// range split across fields) is rejected. The layout must carry a mode.
BlockRuleSpec compile_block(const AclRule& rule, const FieldLayout& layout);

struct PacketHeader {
  std::uint32_t src_ip = 0;
  std::uint16_t src_port = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = 0;

  bool operator==(const PacketHeader&) const = default;
};

/// Header bits for a mode, big-endian within each field.
std::vector<std::uint8_t> packet_bits(const PacketHeader& packet, Mode mode);

/// Integer tuple view of the header under a layout (mode required).
std::vector<std::uint32_t> packet_tuple(const PacketHeader& packet, const FieldLayout& layout);

/// Tuple view of a raw bit vector whose length equals the layout's
/// covered width.
std::vector<std::uint32_t> tuple_from_bits(const std::vector<std::uint8_t>& bits,
                                           const FieldLayout& layout);

std::uint32_t parse_ip(std::string_view text);
std::string format_ip(std::uint32_t ip);

PacketHeader random_packet(RandomSource& rng);
/// Random packet drawn from the rule's match set (wildcards filled
/// uniformly); exercises the hit paths.
PacketHeader random_packet_matching(const AclRule& rule, RandomSource& rng);

}  // namespace sofa
