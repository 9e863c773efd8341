#include "sofa/rules.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

#include "sofa/errors.hpp"

namespace sofa {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream in{std::string(line)};
  while (in >> token) out.push_back(token);
  return out;
}

std::uint32_t parse_uint(std::string_view text, std::uint32_t max, std::size_t line,
                         const char* what) {
  if (text.empty() || text.size() > 10) throw ParseError(line, std::string("bad ") + what);
  std::uint64_t value = 0;
  for (char c : text) {
    if (c < '0' || c > '9') {
      throw ParseError(line, std::string("bad ") + what + " '" + std::string(text) + "'");
    }
    value = value * 10 + static_cast<std::uint64_t>(c - '0');
    if (value > max) {
      throw ParseError(line, std::string(what) + " out of range: '" + std::string(text) + "'");
    }
  }
  return static_cast<std::uint32_t>(value);
}

IpPattern parse_ip_pattern(std::string_view text, std::size_t line) {
  IpPattern pattern;
  if (text == "*") return pattern;  // all four octets wild
  std::size_t start = 0;
  for (int i = 0; i < 4; ++i) {
    std::size_t dot = (i < 3) ? text.find('.', start) : text.size();
    if (dot == std::string_view::npos) {
      throw ParseError(line, "bad IP pattern '" + std::string(text) + "'");
    }
    std::string_view atom = text.substr(start, dot - start);
    if (atom == "*") {
      pattern.octets[i] = std::nullopt;
    } else {
      pattern.octets[i] =
          static_cast<std::uint8_t>(parse_uint(atom, 255, line, "IP octet"));
    }
    start = dot + 1;
  }
  return pattern;
}

PortAtom parse_port_atom(std::string_view text, std::size_t line) {
  PortAtom atom;
  if (text == "*") return atom;
  if (text.front() == '[') {
    if (text.back() != ']') throw ParseError(line, "bad port range '" + std::string(text) + "'");
    std::string_view body = text.substr(1, text.size() - 2);
    std::size_t comma = body.find(',');
    if (comma == std::string_view::npos) {
      throw ParseError(line, "bad port range '" + std::string(text) + "'");
    }
    atom.kind = PortAtom::Kind::range;
    atom.lo = static_cast<std::uint16_t>(parse_uint(body.substr(0, comma), 65535, line, "port"));
    atom.hi = static_cast<std::uint16_t>(parse_uint(body.substr(comma + 1), 65535, line, "port"));
    if (atom.lo > atom.hi) {
      throw ParseError(line, "inverted port range '" + std::string(text) + "'");
    }
    return atom;
  }
  atom.kind = PortAtom::Kind::literal;
  atom.lo = atom.hi = static_cast<std::uint16_t>(parse_uint(text, 65535, line, "port"));
  return atom;
}

Proto parse_proto(std::string_view text, std::size_t line) {
  const std::string t = lower(text);
  if (t == "*" || t == "any") return Proto::any;
  if (t == "tcp") return Proto::tcp;
  if (t == "udp") return Proto::udp;
  if (t == "icmp") return Proto::icmp;
  throw ParseError(line, "unknown protocol token '" + std::string(text) + "'");
}

void append_bits(std::vector<std::uint8_t>& bits, std::uint32_t value, unsigned width) {
  for (unsigned j = width; j-- > 0;) bits.push_back((value >> j) & 1u);
}

}  // namespace

Action make_action(ActionKind kind) {
  return Action{kind, kind == ActionKind::permit ? "permit" : "deny"};
}

Action action_from_token(std::string_view token) {
  const std::string t = lower(token);
  if (t == "permit") return Action{ActionKind::permit, std::string(token)};
  if (t == "deny") return Action{ActionKind::deny, std::string(token)};
  throw InputError("unknown action token '" + std::string(token) + "'");
}

std::vector<AclRule> parse_acl(std::string_view text) {
  std::vector<AclRule> rules;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (end == text.size() && line.empty()) break;

    std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 6) {
      throw ParseError(line_no,
                       "expected '<action> <src_ip> <src_port> <dst_ip> <dst_port> <proto>'");
    }
    AclRule rule;
    try {
      rule.action = action_from_token(tokens[0]);
    } catch (const InputError& e) {
      throw ParseError(line_no, e.what());
    }
    rule.src_ip = parse_ip_pattern(tokens[1], line_no);
    rule.src_port = parse_port_atom(tokens[2], line_no);
    rule.dst_ip = parse_ip_pattern(tokens[3], line_no);
    rule.dst_port = parse_port_atom(tokens[4], line_no);
    rule.proto = parse_proto(tokens[5], line_no);
    rule.line_no = line_no;
    rules.push_back(std::move(rule));
  }
  return rules;
}

namespace {

std::string format_ip_pattern(const IpPattern& p) {
  bool all_wild = true;
  for (const auto& o : p.octets) all_wild = all_wild && !o.has_value();
  if (all_wild) return "*";
  std::string out;
  for (int i = 0; i < 4; ++i) {
    if (i) out.push_back('.');
    out += p.octets[i] ? std::to_string(*p.octets[i]) : "*";
  }
  return out;
}

std::string format_port_atom(const PortAtom& a) {
  switch (a.kind) {
    case PortAtom::Kind::wildcard:
      return "*";
    case PortAtom::Kind::literal:
      return std::to_string(a.lo);
    case PortAtom::Kind::range:
      return "[" + std::to_string(a.lo) + "," + std::to_string(a.hi) + "]";
  }
  return "*";
}

std::string format_proto(Proto p) {
  switch (p) {
    case Proto::tcp:
      return "TCP";
    case Proto::udp:
      return "UDP";
    case Proto::icmp:
      return "ICMP";
    case Proto::any:
      return "*";
  }
  return "*";
}

}  // namespace

std::string format_rule(const AclRule& rule) {
  std::string out = rule.action.raw;
  out += " " + format_ip_pattern(rule.src_ip);
  out += " " + format_port_atom(rule.src_port);
  out += " " + format_ip_pattern(rule.dst_ip);
  out += " " + format_port_atom(rule.dst_port);
  out += " " + format_proto(rule.proto);
  return out;
}

std::string format_acl(const std::vector<AclRule>& rules) {
  std::string out;
  for (const auto& r : rules) {
    out += format_rule(r);
    out.push_back('\n');
  }
  return out;
}

std::uint32_t mode_bits(Mode mode) {
  return mode == Mode::standard ? kStandardBits : kExtendedBits;
}

std::uint32_t BitRule::wildcard_count() const noexcept {
  std::uint32_t count = 0;
  for (auto w : wild) count += w;
  return count;
}

BitRule compile_bit(const AclRule& rule, Mode mode) {
  BitRule out;
  out.action = rule.action;
  auto put_ip = [&](const IpPattern& ip) {
    for (const auto& octet : ip.octets) {
      if (octet) {
        append_bits(out.v, *octet, 8);
        out.wild.insert(out.wild.end(), 8, 0);
      } else {
        out.v.insert(out.v.end(), 8, 0);
        out.wild.insert(out.wild.end(), 8, 1);
      }
    }
  };
  auto put_port = [&](const PortAtom& port, const char* which) {
    switch (port.kind) {
      case PortAtom::Kind::wildcard:
        out.v.insert(out.v.end(), 16, 0);
        out.wild.insert(out.wild.end(), 16, 1);
        return;
      case PortAtom::Kind::literal:
        append_bits(out.v, port.lo, 16);
        out.wild.insert(out.wild.end(), 16, 0);
        return;
      case PortAtom::Kind::range:
        throw InputError(std::string(which) +
                         " range [" + std::to_string(port.lo) + "," + std::to_string(port.hi) +
                         "] is not expressible at bit level");
    }
  };

  put_ip(rule.src_ip);
  if (mode == Mode::standard) return out;

  put_port(rule.src_port, "src_port");
  put_ip(rule.dst_ip);
  put_port(rule.dst_port, "dst_port");
  if (rule.proto == Proto::any) {
    out.v.insert(out.v.end(), 8, 0);
    out.wild.insert(out.wild.end(), 8, 1);
  } else {
    append_bits(out.v, static_cast<std::uint8_t>(rule.proto), 8);
    out.wild.insert(out.wild.end(), 8, 0);
  }
  return out;
}

std::uint64_t FieldLayout::total_domain() const {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) total += domain_size(i);
  return total;
}

std::uint32_t FieldLayout::bit_offset(std::size_t i) const {
  std::uint32_t off = 0;
  for (std::size_t j = 0; j < i; ++j) off += fields.at(j).width_bits;
  return off;
}

std::uint32_t FieldLayout::covered_bits() const {
  std::uint32_t total = 0;
  for (const auto& f : fields) total += f.width_bits;
  return total;
}

FieldLayout octet_layout() {
  FieldLayout layout;
  layout.mode = Mode::standard;
  layout.fields = {{"src_ip[0]", 8}, {"src_ip[1]", 8}, {"src_ip[2]", 8}, {"src_ip[3]", 8}};
  return layout;
}

namespace {

void validate_layout(const FieldLayout& layout) {
  for (const auto& f : layout.fields) {
    if (f.width_bits == 0 || f.width_bits > 16) {
      throw InputError("layout field '" + f.name + "' width must be in [1, 16]");
    }
  }
  if (layout.mode && layout.covered_bits() != mode_bits(*layout.mode)) {
    throw InputError("layout widths sum to " + std::to_string(layout.covered_bits()) +
                     ", expected " + std::to_string(mode_bits(*layout.mode)));
  }
}

// Every rule atom matches an integer interval over a contiguous bit slice
// of the header: a literal octet is [v,v] over its 8 bits, a wildcard is
// the full interval, a port range is [lo,hi] over 16 bits.
struct AtomRange {
  std::uint32_t bit_offset = 0;
  std::uint32_t width = 0;
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;

  std::uint64_t size() const noexcept { return std::uint64_t(hi) - lo + 1; }
};

std::vector<AtomRange> rule_atoms(const AclRule& rule, Mode mode) {
  std::vector<AtomRange> atoms;
  std::uint32_t off = 0;
  auto add_ip = [&](const IpPattern& ip) {
    for (const auto& octet : ip.octets) {
      if (octet) {
        atoms.push_back({off, 8, *octet, *octet});
      } else {
        atoms.push_back({off, 8, 0, 255});
      }
      off += 8;
    }
  };
  auto add_port = [&](const PortAtom& port) {
    atoms.push_back({off, 16, port.lo, port.hi});
    off += 16;
  };
  add_ip(rule.src_ip);
  if (mode == Mode::extended) {
    add_port(rule.src_port);
    add_ip(rule.dst_ip);
    add_port(rule.dst_port);
    if (rule.proto == Proto::any) {
      atoms.push_back({off, 8, 0, 255});
    } else {
      const auto v = static_cast<std::uint32_t>(rule.proto);
      atoms.push_back({off, 8, v, v});
    }
    off += 8;
  }
  return atoms;
}

// Does any y in [lo, hi] have bit slice s at significances [s_hi, s_lo]?
bool atom_slice_admits(const AtomRange& atom, unsigned s_hi, unsigned s_lo, std::uint32_t s) {
  const std::int64_t lo = atom.lo, hi = atom.hi;
  const std::int64_t block = std::int64_t(1) << s_lo;           // free low bits
  const std::int64_t stride = std::int64_t(1) << (s_hi + 1);    // free high bits step
  const std::int64_t base = std::int64_t(s) << s_lo;
  const std::int64_t t_cap = std::int64_t(1) << (atom.width - s_hi - 1);
  if (base > hi) return false;
  std::int64_t t_max = (hi - base) / stride;
  std::int64_t t_min = (lo - base - (block - 1) + stride - 1) / stride;
  if (t_min < 0) t_min = 0;
  if (t_max > t_cap - 1) t_max = t_cap - 1;
  return t_min <= t_max;
}

}  // namespace

bool BlockRuleSpec::field_admits(std::size_t i, std::uint32_t value) const {
  const auto& f = filters.at(i);
  return std::binary_search(f.begin(), f.end(), value);
}

BlockRuleSpec compile_block(const AclRule& rule, const FieldLayout& layout) {
  validate_layout(layout);
  if (!layout.mode) throw InputError("compile_block: layout must cover a header mode");
  const auto atoms = rule_atoms(rule, *layout.mode);

  BlockRuleSpec out;
  out.action = rule.action;
  out.filters.resize(layout.k());

  mpz_class filter_product = 1;
  for (std::size_t i = 0; i < layout.k(); ++i) {
    const std::uint32_t f_off = layout.bit_offset(i);
    const std::uint32_t f_width = layout.fields[i].width_bits;
    auto& filter = out.filters[i];
    for (std::uint32_t x = 0; x < (1u << f_width); ++x) {
      bool ok = true;
      for (const auto& atom : atoms) {
        const std::uint32_t ov_lo = std::max(f_off, atom.bit_offset);
        const std::uint32_t ov_hi = std::min(f_off + f_width, atom.bit_offset + atom.width);
        if (ov_lo >= ov_hi) continue;
        const unsigned s_hi = atom.bit_offset + atom.width - 1 - ov_lo;
        const unsigned s_lo = atom.bit_offset + atom.width - ov_hi;
        const unsigned x_shift = f_off + f_width - ov_hi;
        const unsigned len = ov_hi - ov_lo;
        const std::uint32_t slice = (x >> x_shift) & ((1u << len) - 1u);
        if (!atom_slice_admits(atom, s_hi, s_lo, slice)) {
          ok = false;
          break;
        }
      }
      if (ok) filter.push_back(x);
    }
    filter_product *= static_cast<unsigned long>(filter.size());
  }

  mpz_class atom_product = 1;
  for (const auto& atom : atoms) atom_product *= static_cast<unsigned long>(atom.size());
  if (filter_product != atom_product) {
    throw InputError("rule '" + format_rule(rule) +
                     "' is not a per-field cross product under the layout");
  }
  return out;
}

std::vector<std::uint8_t> packet_bits(const PacketHeader& packet, Mode mode) {
  std::vector<std::uint8_t> bits;
  bits.reserve(mode_bits(mode));
  append_bits(bits, packet.src_ip, 32);
  if (mode == Mode::extended) {
    append_bits(bits, packet.src_port, 16);
    append_bits(bits, packet.dst_ip, 32);
    append_bits(bits, packet.dst_port, 16);
    append_bits(bits, packet.proto, 8);
  }
  return bits;
}

std::vector<std::uint32_t> packet_tuple(const PacketHeader& packet, const FieldLayout& layout) {
  validate_layout(layout);
  if (!layout.mode) throw InputError("packet_tuple: layout must cover a header mode");
  return tuple_from_bits(packet_bits(packet, *layout.mode), layout);
}

std::vector<std::uint32_t> tuple_from_bits(const std::vector<std::uint8_t>& bits,
                                           const FieldLayout& layout) {
  if (bits.size() != layout.covered_bits()) {
    throw InputError("tuple_from_bits: bit count does not match the layout");
  }
  std::vector<std::uint32_t> tuple;
  tuple.reserve(layout.k());
  std::size_t pos = 0;
  for (const auto& field : layout.fields) {
    std::uint32_t value = 0;
    for (std::uint32_t j = 0; j < field.width_bits; ++j) value = (value << 1) | bits[pos++];
    tuple.push_back(value);
  }
  return tuple;
}

std::uint32_t parse_ip(std::string_view text) {
  IpPattern p = parse_ip_pattern(text, 0);
  std::uint32_t ip = 0;
  for (const auto& octet : p.octets) {
    if (!octet) throw InputError("IP address may not contain wildcards: '" + std::string(text) + "'");
    ip = (ip << 8) | *octet;
  }
  return ip;
}

std::string format_ip(std::uint32_t ip) {
  return std::to_string((ip >> 24) & 0xff) + "." + std::to_string((ip >> 16) & 0xff) + "." +
         std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff);
}

PacketHeader random_packet(RandomSource& rng) {
  PacketHeader p;
  p.src_ip = static_cast<std::uint32_t>(rng.below_u64(1ULL << 32));
  p.src_port = static_cast<std::uint16_t>(rng.below_u64(1ULL << 16));
  p.dst_ip = static_cast<std::uint32_t>(rng.below_u64(1ULL << 32));
  p.dst_port = static_cast<std::uint16_t>(rng.below_u64(1ULL << 16));
  p.proto = static_cast<std::uint8_t>(rng.below_u64(256));
  return p;
}

PacketHeader random_packet_matching(const AclRule& rule, RandomSource& rng) {
  auto pick_ip = [&](const IpPattern& pattern) {
    std::uint32_t ip = 0;
    for (const auto& octet : pattern.octets) {
      const std::uint32_t value =
          octet ? *octet : static_cast<std::uint32_t>(rng.below_u64(256));
      ip = (ip << 8) | value;
    }
    return ip;
  };
  auto pick_port = [&](const PortAtom& atom) {
    return static_cast<std::uint16_t>(atom.lo + rng.below_u64(std::uint64_t(atom.hi) - atom.lo + 1));
  };
  PacketHeader p;
  p.src_ip = pick_ip(rule.src_ip);
  p.src_port = pick_port(rule.src_port);
  p.dst_ip = pick_ip(rule.dst_ip);
  p.dst_port = pick_port(rule.dst_port);
  if (rule.proto == Proto::any) {
    static constexpr std::uint8_t kCommon[] = {6, 17, 1};
    p.proto = kCommon[rng.below_u64(3)];
  } else {
    p.proto = static_cast<std::uint8_t>(rule.proto);
  }
  return p;
}

}  // namespace sofa
