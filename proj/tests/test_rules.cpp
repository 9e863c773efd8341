#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "sofa/errors.hpp"
#include "sofa/match.hpp"
#include "sofa/rules.hpp"

using namespace sofa;

namespace {

const char* kTableText =
    "# examples\n"
    "deny 192.168.45.* * * * *\n"
    "permit 10.*.*.* * 192.168.4.* 80 TCP\n"
    "permit 10.56.*.* * 192.168.*.* [22,88] TCP\n"
    "deny 114.212.190.* 8000 * 8090 UDP\n";

bool same_rule(const AclRule& a, const AclRule& b) {
  return a.src_ip == b.src_ip && a.src_port == b.src_port && a.dst_ip == b.dst_ip &&
         a.dst_port == b.dst_port && a.proto == b.proto && a.action == b.action;
}

std::vector<std::uint8_t> bits_of(const std::string& s) {
  std::vector<std::uint8_t> out;
  for (char c : s) {
    if (c == '0' || c == '1') out.push_back(c == '1');
  }
  return out;
}

}  // namespace

TEST_CASE("parse_acl: the four example rules") {
  auto rules = parse_acl(kTableText);
  REQUIRE(rules.size() == 4);

  CHECK(rules[0].action.kind == ActionKind::deny);
  CHECK(rules[0].src_ip.octets[0] == 192);
  CHECK(rules[0].src_ip.octets[1] == 168);
  CHECK(rules[0].src_ip.octets[2] == 45);
  CHECK_FALSE(rules[0].src_ip.octets[3].has_value());
  CHECK(rules[0].proto == Proto::any);
  CHECK(rules[0].line_no == 2);

  CHECK(rules[1].dst_ip.octets[2] == 4);
  CHECK(rules[1].dst_port.kind == PortAtom::Kind::literal);
  CHECK(rules[1].dst_port.lo == 80);
  CHECK(rules[1].proto == Proto::tcp);

  CHECK(rules[2].dst_port.kind == PortAtom::Kind::range);
  CHECK(rules[2].dst_port.lo == 22);
  CHECK(rules[2].dst_port.hi == 88);

  CHECK(rules[3].src_port.lo == 8000);
  CHECK(rules[3].dst_port.lo == 8090);
  CHECK(rules[3].proto == Proto::udp);
  CHECK(rules[3].line_no == 5);
}

TEST_CASE("parse_acl: malformed input reports the line") {
  auto expect_line = [](const char* text, std::size_t line) {
    try {
      parse_acl(text);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
    }
  };
  expect_line("deny 192.168.45.256 * * * *\n", 1);
  expect_line("# ok\npermit 10.0.0.1 [88,22] * * TCP\n", 2);
  expect_line("permit * * * * FOO\n", 1);
  expect_line("deny 1.2.3.4 * *\n", 1);
  expect_line("deny 1.2.3 * * * *\n", 1);
  expect_line("block 1.2.3.4 * * * *\n", 1);
  expect_line("deny 1.2.3.4 70000 * * *\n", 1);
}

TEST_CASE("format/parse round trip") {
  auto rules = parse_acl(kTableText);
  auto reparsed = parse_acl(format_acl(rules));
  REQUIRE(reparsed.size() == rules.size());
  for (std::size_t i = 0; i < rules.size(); ++i) CHECK(same_rule(rules[i], reparsed[i]));
  CHECK(format_acl(reparsed) == format_acl(rules));

  auto mixed = parse_acl("DENY * [5,5] 1.*.3.* 0 icmp\n");
  auto mixed2 = parse_acl(format_acl(mixed));
  CHECK(same_rule(mixed[0], mixed2[0]));
}

TEST_CASE("compile_bit: the worked example") {
  auto rules = parse_acl(kTableText);
  BitRule r = compile_bit(rules[0], Mode::standard);
  CHECK(r.n() == 32);
  CHECK(r.v == bits_of("11000000 10101000 00101101 00000000"));
  for (std::uint32_t i = 0; i < 32; ++i) CHECK(r.wild[i] == (i >= 24 ? 1 : 0));
  CHECK(r.action.kind == ActionKind::deny);
  CHECK(r.wildcard_count() == 8);
}

TEST_CASE("compile_bit: wildcard spread, ranges, extended positions") {
  auto all = parse_acl("deny * * * * *\n");
  BitRule r = compile_bit(all[0], Mode::standard);
  CHECK(r.wildcard_count() == 32);
  for (auto b : r.v) CHECK(b == 0);

  // per-octet wildcards are any-position wildcards
  auto holes = parse_acl("permit 10.*.45.* * * * *\n");
  BitRule h = compile_bit(holes[0], Mode::standard);
  for (std::uint32_t i = 0; i < 32; ++i) {
    const bool wild = (i >= 8 && i < 16) || i >= 24;
    CHECK(h.wild[i] == (wild ? 1 : 0));
  }

  // ranges do not fit the bit view
  auto ranged = parse_acl(kTableText);
  CHECK_THROWS_AS(compile_bit(ranged[2], Mode::extended), InputError);
  CHECK(compile_bit(ranged[2], Mode::standard).n() == 32);  // standard ignores ports

  auto ext = parse_acl("permit 1.2.3.4 80 5.6.7.8 443 TCP\n");
  BitRule e = compile_bit(ext[0], Mode::extended);
  REQUIRE(e.n() == 104);
  CHECK(e.wildcard_count() == 0);
  // src_port sits at bits 32..47, big-endian: 80 = 0000000001010000
  std::vector<std::uint8_t> port(e.v.begin() + 32, e.v.begin() + 48);
  CHECK(port == bits_of("00000000 01010000"));
  // proto occupies the trailing byte: TCP = 6
  std::vector<std::uint8_t> proto(e.v.begin() + 96, e.v.end());
  CHECK(proto == bits_of("00000110"));

  auto anyproto = parse_acl("permit 1.2.3.4 80 5.6.7.8 443 *\n");
  BitRule ap = compile_bit(anyproto[0], Mode::extended);
  CHECK(ap.wildcard_count() == 8);
}

TEST_CASE("compile_block: octet filters and range fields") {
  auto rules = parse_acl(kTableText);
  BlockRuleSpec b = compile_block(rules[0], octet_layout());
  REQUIRE(b.filters.size() == 4);
  CHECK(b.filters[0] == std::vector<std::uint32_t>{192});
  CHECK(b.filters[1] == std::vector<std::uint32_t>{168});
  CHECK(b.filters[2] == std::vector<std::uint32_t>{45});
  CHECK(b.filters[3].size() == 256);

  // extended layout with whole ports as 16-bit fields
  FieldLayout ext;
  ext.mode = Mode::extended;
  ext.fields = {{"s0", 8}, {"s1", 8}, {"s2", 8}, {"s3", 8}, {"sport", 16},
                {"d0", 8}, {"d1", 8}, {"d2", 8}, {"d3", 8}, {"dport", 16},
                {"proto", 8}};
  BlockRuleSpec r3 = compile_block(rules[2], ext);
  const auto& dport = r3.filters[9];
  REQUIRE(dport.size() == 67);
  CHECK(dport.front() == 22);
  CHECK(dport.back() == 88);
  CHECK(r3.filters[10] == std::vector<std::uint32_t>{6});

  // splitting the port byte-wise makes [200,300] non-rectangular
  FieldLayout split;
  split.mode = Mode::extended;
  split.fields = {{"s0", 8}, {"s1", 8}, {"s2", 8}, {"s3", 8}, {"sport", 16},
                  {"d0", 8}, {"d1", 8}, {"d2", 8}, {"d3", 8},
                  {"dp_hi", 8}, {"dp_lo", 8}, {"proto", 8}};
  auto wide = parse_acl("deny * * * [200,300] *\n");
  CHECK_THROWS_AS(compile_block(wide[0], split), InputError);
  // ...but a byte-aligned range is fine
  auto aligned = parse_acl("deny * * * [256,511] *\n");
  BlockRuleSpec ok = compile_block(aligned[0], split);
  CHECK(ok.filters[9] == std::vector<std::uint32_t>{1});
  CHECK(ok.filters[10].size() == 256);
}

TEST_CASE("packet views: bits, tuple, protocol numbers") {
  PacketHeader p;
  p.src_ip = parse_ip("192.168.45.7");
  auto bits = packet_bits(p, Mode::standard);
  CHECK(bits == bits_of("11000000 10101000 00101101 00000111"));
  CHECK(packet_tuple(p, octet_layout()) == std::vector<std::uint32_t>{192, 168, 45, 7});

  p.proto = 6;
  auto ext = packet_bits(p, Mode::extended);
  REQUIRE(ext.size() == 104);
  std::vector<std::uint8_t> proto(ext.begin() + 96, ext.end());
  CHECK(proto == bits_of("00000110"));

  CHECK(format_ip(parse_ip("10.56.1.2")) == "10.56.1.2");
  CHECK_THROWS_AS(parse_ip("10.56.*.2"), InputError);
}

TEST_CASE("bit and block matching agree: exhaustive over the first 16 bits") {
  auto rules = parse_acl(
      "deny 192.168.*.* * * * *\n"
      "permit 192.*.*.* * * * *\n"
      "deny 10.77.*.* * * * *\n"
      "permit *.5.*.* * * * *\n");
  std::vector<BitRule> bit_rules;
  std::vector<BlockRuleSpec> block_rules;
  for (const auto& r : rules) {
    bit_rules.push_back(compile_bit(r, Mode::standard));
    block_rules.push_back(compile_block(r, octet_layout()));
  }
  const Action fallback = make_action(ActionKind::deny);
  for (std::uint32_t x = 0; x < (1u << 16); ++x) {
    PacketHeader p;
    p.src_ip = x << 16;
    const auto bit_decision = oracle_filter(bit_rules, packet_bits(p, Mode::standard), fallback);
    const auto block_decision =
        oracle_filter(block_rules, packet_tuple(p, octet_layout()), fallback);
    REQUIRE(bit_decision == block_decision);
  }
}

TEST_CASE("bit and block matching agree: random packets at full width") {
  auto rules = parse_acl(
      "deny 192.168.45.* * * * *\n"
      "permit 10.*.3.9 * * * *\n"
      "deny 10.*.*.* * * * *\n"
      "permit 172.16.*.1 * * * *\n");
  std::vector<BitRule> bit_rules;
  std::vector<BlockRuleSpec> block_rules;
  for (const auto& r : rules) {
    bit_rules.push_back(compile_bit(r, Mode::standard));
    block_rules.push_back(compile_block(r, octet_layout()));
  }
  const Action fallback = make_action(ActionKind::permit);
  RandomSource rng(77);
  for (int i = 0; i < 10000; ++i) {
    PacketHeader p = (i % 2 == 0) ? random_packet(rng)
                                  : random_packet_matching(rules[rng.below_u64(rules.size())], rng);
    const auto bit_decision = oracle_filter(bit_rules, packet_bits(p, Mode::standard), fallback);
    const auto block_decision =
        oracle_filter(block_rules, packet_tuple(p, octet_layout()), fallback);
    REQUIRE(bit_decision == block_decision);
  }
}

TEST_CASE("layout validation") {
  FieldLayout bad;
  bad.mode = Mode::standard;
  bad.fields = {{"a", 8}, {"b", 8}};
  PacketHeader p;
  CHECK_THROWS_AS(packet_tuple(p, bad), InputError);

  FieldLayout raw;
  raw.mode = std::nullopt;
  raw.fields = {{"hi", 4}, {"lo", 4}};
  CHECK(raw.covered_bits() == 8);
  CHECK(tuple_from_bits(bits_of("1010 0110"), raw) == std::vector<std::uint32_t>{10, 6});
  auto rule = parse_acl("deny * * * * *\n");
  CHECK_THROWS_AS(compile_block(rule[0], raw), InputError);
}
