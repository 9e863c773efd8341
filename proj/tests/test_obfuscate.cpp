#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>

#include "sofa/analysis.hpp"
#include "sofa/errors.hpp"
#include "sofa/match.hpp"
#include "sofa/obfuscate.hpp"
#include "sofa/serialize.hpp"

using namespace sofa;

namespace {

// "v:1010 w:0011" style helper for toy rules.
BitRule toy_rule(const std::string& v, const std::string& w,
                 ActionKind action = ActionKind::deny) {
  BitRule r;
  r.action = make_action(action);
  for (char c : v) r.v.push_back(c == '1');
  for (char c : w) r.wild.push_back(c == '1');
  REQUIRE(r.v.size() == r.wild.size());
  for (std::size_t i = 0; i < r.v.size(); ++i) {
    if (r.wild[i]) REQUIRE(r.v[i] == 0);
  }
  return r;
}

std::vector<std::uint8_t> to_bits(std::uint32_t value, std::uint32_t width) {
  std::vector<std::uint8_t> bits(width);
  for (std::uint32_t i = 0; i < width; ++i) bits[i] = (value >> (width - 1 - i)) & 1;
  return bits;
}

ObfuscateContext transparent_ctx(OpCounter* counter = nullptr) {
  ObfuscateContext ctx;
  ctx.backend = Backend::transparent;
  ctx.counter = counter;
  return ctx;
}

}  // namespace

TEST_CASE("naive: encode and re_rand counts match 2l(2n+1)") {
  OpCounter counter;
  auto ctx = transparent_ctx(&counter);
  RandomSource rng(1);
  auto fw = obfuscate_naive({toy_rule("1011", "0000")}, ctx, rng);
  CHECK(counter.encode == 18);  // 2*(2*4+1)
  CHECK(counter.re_rand == 18);
  CHECK(fw.parts.size() == 1);
  CHECK(fw.parts[0].ges->kappa() == 5);
  auto report = count_report(counter, Scheme::naive, 4, 1, 0, 0, 0);
  CHECK(report.matches);
}

TEST_CASE("naive: 50 rules at 32 bits yields kappa 33 and 6500 encodes") {
  std::vector<BitRule> rules;
  RandomSource gen(2);
  for (int r = 0; r < 50; ++r) {
    BitRule rule;
    rule.action = make_action(r % 2 ? ActionKind::permit : ActionKind::deny);
    for (int i = 0; i < 32; ++i) {
      const bool wild = gen.below_u64(4) == 0;
      rule.wild.push_back(wild);
      rule.v.push_back(wild ? 0 : gen.below_u64(2));
    }
    rules.push_back(std::move(rule));
  }
  OpCounter counter;
  auto ctx = transparent_ctx(&counter);
  RandomSource rng(3);
  auto fw = obfuscate_naive(rules, ctx, rng);
  CHECK(fw.parts[0].ges->kappa() == 33);
  CHECK(counter.encode == 6500);  // 2*50*(2*32+1)
  CHECK(counter.re_rand == 6500);
}

TEST_CASE("naive: empty rule set falls through to the default action") {
  auto ctx = transparent_ctx();
  ctx.mode = Mode::standard;
  ctx.default_action = make_action(ActionKind::permit);
  RandomSource rng(4);
  auto fw = obfuscate_naive({}, ctx, rng);
  CHECK(fw.rule_count() == 0);
  PacketHeader p;
  p.src_ip = 0x01020304;
  auto decision = filter_packet(fw, p);
  CHECK(decision.action.kind == ActionKind::permit);
  CHECK_FALSE(decision.rule_index.has_value());
}

TEST_CASE("mixed widths are rejected") {
  auto ctx = transparent_ctx();
  RandomSource rng(5);
  CHECK_THROWS_AS(
      obfuscate_naive({toy_rule("101", "000"), toy_rule("10", "00")}, ctx, rng),
      InputError);
}

TEST_CASE("basic: encode counts match 4(M+N)+2l and indexes never repeat") {
  OpCounter counter;
  auto ctx = transparent_ctx(&counter);
  RandomSource rng(6);
  auto fw = obfuscate_basic({toy_rule("10", "00")}, BasicSchemeConfig{2, 2}, ctx, rng);
  CHECK(counter.encode == 18);  // 4*(2+2) + 2*1
  CHECK(counter.re_rand == 18);
  CHECK(count_report(counter, Scheme::basic, 2, 1, 2, 2, 0).matches);
  CHECK(fw.parts[0].units.size() == 4);

  RandomSource rng2(7);
  for (int seed = 0; seed < 30; ++seed) {
    RandomSource r(seed);
    auto fw2 = obfuscate_basic(
        {toy_rule("10100101", "01010000"), toy_rule("00000000", "11111111")},
        BasicSchemeConfig{8, 8}, transparent_ctx(), r);
    for (const auto& rule : fw2.parts[0].rules) {
      const auto& pr = std::get<BasicRule>(rule).pr;
      CHECK(std::set<std::uint32_t>(pr.begin(), pr.end()).size() == pr.size());
    }
  }
}

TEST_CASE("basic: config smaller than a rule's class demand is rejected") {
  auto ctx = transparent_ctx();
  RandomSource rng(8);
  CHECK_THROWS_WITH_AS(
      obfuscate_basic({toy_rule("0000", "0011")}, BasicSchemeConfig{1, 4}, ctx, rng),
      doctest::Contains("raise M"), InputError);
  CHECK_THROWS_WITH_AS(
      obfuscate_basic({toy_rule("0000", "0011")}, BasicSchemeConfig{4, 1}, ctx, rng),
      doctest::Contains("raise N"), InputError);
}

TEST_CASE("basic: all-wildcard rule accepts every packet") {
  auto ctx = transparent_ctx();
  RandomSource rng(9);
  auto fw = obfuscate_basic({toy_rule("0000", "1111")}, BasicSchemeConfig{4, 4}, ctx, rng);
  for (std::uint32_t x = 0; x < 16; ++x) {
    CHECK(match_rule(fw, 0, make_view_bits(fw, to_bits(x, 4))));
  }
}

TEST_CASE("blocking: per-rule pair count is sum of domains plus one") {
  auto rules = parse_acl("deny 192.168.45.* * * * *\npermit 10.*.*.* * * * *\n");
  std::vector<BlockRuleSpec> block;
  for (const auto& r : rules) block.push_back(compile_block(r, octet_layout()));
  OpCounter counter;
  auto ctx = transparent_ctx(&counter);
  RandomSource rng(10);
  auto fw = obfuscate_blocking(block, octet_layout(), ctx, rng);
  CHECK(fw.parts[0].ges->kappa() == 5);
  CHECK(counter.encode == 2 * 2 * (4 * 256 + 1));  // 2l(sum|I_i|+1)
  CHECK(counter.re_rand == counter.encode);
  CHECK(count_report(counter, Scheme::blocking, 0, 2, 0, 0, 1024).matches);
}

TEST_CASE("blocking: the domain cap guards oversized layouts") {
  auto rules = parse_acl("deny 192.168.45.* * * * *\n");
  std::vector<BlockRuleSpec> block{compile_block(rules[0], octet_layout())};
  auto ctx = transparent_ctx();
  ctx.blocking_domain_cap = 1000;  // below 4*256
  RandomSource rng(11);
  CHECK_THROWS_AS(obfuscate_blocking(block, octet_layout(), ctx, rng), InputError);
}

TEST_CASE("dnc: four parts of eight bits, distinct zero tests, offsets") {
  std::vector<BitRule> rules;
  RandomSource gen(12);
  for (int r = 0; r < 3; ++r) {
    BitRule rule;
    rule.action = make_action(ActionKind::deny);
    for (int i = 0; i < 32; ++i) {
      const bool wild = gen.below_u64(3) == 0;
      rule.wild.push_back(wild);
      rule.v.push_back(wild ? 0 : gen.below_u64(2));
    }
    rules.push_back(std::move(rule));
  }
  OpCounter counter;
  auto ctx = transparent_ctx(&counter);
  RandomSource rng(13);
  auto fw = obfuscate_dnc(rules, 4, Scheme::naive, ctx, rng);
  REQUIRE(fw.parts.size() == 4);
  std::set<std::string> pzts;
  for (std::uint32_t p = 0; p < 4; ++p) {
    CHECK(fw.parts[p].ges->kappa() == 9);
    CHECK(fw.parts[p].bit_offset == p * 8);
    CHECK(fw.parts[p].width == 8);
    pzts.insert(fw.parts[p].ges->modulus().get_str(16));
  }
  CHECK(pzts.size() == 4);  // independent instances
  CHECK(counter.encode == 4 * 2 * 3 * (2 * 8 + 1));  // four naive parts
}

TEST_CASE("dnc: part count one degenerates to the inner scheme's decisions") {
  std::vector<BitRule> rules{toy_rule("10110010", "00000001"),
                             toy_rule("01000000", "00111100", ActionKind::permit)};
  auto ctx = transparent_ctx();
  RandomSource r1(14), r2(14);
  auto plain = obfuscate_naive(rules, ctx, r1);
  auto dnc = obfuscate_dnc(rules, 1, Scheme::naive, ctx, r2);
  for (std::uint32_t x = 0; x < 256; ++x) {
    auto bits = to_bits(x, 8);
    CHECK(filter_view(plain, make_view_bits(plain, bits)) ==
          filter_view(dnc, make_view_bits(dnc, bits)));
  }
}

TEST_CASE("dnc: remainder handling and bounds") {
  std::vector<BitRule> rules{toy_rule("1011001001", "0000000000")};
  auto ctx = transparent_ctx();
  RandomSource rng(15);
  CHECK_THROWS_AS(obfuscate_dnc(rules, 3, Scheme::naive, ctx, rng), InputError);
  CHECK_THROWS_AS(obfuscate_dnc(rules, 11, Scheme::naive, ctx, rng), InputError);
  CHECK_THROWS_AS(obfuscate_dnc(rules, 2, Scheme::blocking, ctx, rng), InputError);

  auto fw = obfuscate_dnc(rules, 3, Scheme::naive, ctx, rng, /*allow_remainder=*/true);
  REQUIRE(fw.parts.size() == 3);
  CHECK(fw.parts[0].width == 3);
  CHECK(fw.parts[1].width == 3);
  CHECK(fw.parts[2].width == 4);
  for (std::uint32_t x = 0; x < 1024; ++x) {
    auto bits = to_bits(x, 10);
    CHECK(match_rule(fw, 0, make_view_bits(fw, bits)) == oracle_match(rules[0], bits));
  }
}

TEST_CASE("dnc: one part per bit still matches the oracle exhaustively") {
  std::vector<BitRule> rules{toy_rule("10100100", "00000011"),
                             toy_rule("00000000", "11111111", ActionKind::permit)};
  auto ctx = transparent_ctx();
  RandomSource rng(151);
  auto fw = obfuscate_dnc(rules, 8, Scheme::naive, ctx, rng);
  REQUIRE(fw.parts.size() == 8);
  for (const auto& part : fw.parts) CHECK(part.ges->kappa() == 2);
  const Action fallback = make_action(ActionKind::deny);
  for (std::uint32_t x = 0; x < 256; ++x) {
    auto bits = to_bits(x, 8);
    CHECK(filter_view(fw, make_view_bits(fw, bits)) == oracle_filter(rules, bits, fallback));
  }
}

TEST_CASE("blocking: empty filter sets are rejected") {
  BlockRuleSpec rule;
  rule.action = make_action(ActionKind::deny);
  rule.filters = {{1, 2}, {}};
  FieldLayout layout;
  layout.mode = std::nullopt;
  layout.fields = {{"hi", 4}, {"lo", 4}};
  auto ctx = transparent_ctx();
  RandomSource rng(152);
  CHECK_THROWS_AS(obfuscate_blocking({rule}, layout, ctx, rng), InputError);
}

TEST_CASE("op counters: snapshot diff and merge") {
  OpCounter counter;
  auto ctx = transparent_ctx(&counter);
  RandomSource rng(153);
  obfuscate_naive({toy_rule("10", "00")}, ctx, rng);
  const OpCounter snapshot = counter;
  obfuscate_naive({toy_rule("10", "00"), toy_rule("01", "00")}, ctx, rng);
  const OpCounter second_run = counter.since(snapshot);
  CHECK(second_run.encode == 20);  // 2*2*(2*2+1)
  CHECK(snapshot.encode == 10);
  OpCounter merged;
  merged.merge(snapshot);
  merged.merge(second_run);
  CHECK(merged.encode == counter.encode);
  CHECK(merged.mul == counter.mul);
}

TEST_CASE("dnc: basic inner uses per-part unit pools") {
  std::vector<BitRule> rules{toy_rule("1011000000110100", "0000111100000000")};
  OpCounter counter;
  auto ctx = transparent_ctx(&counter);
  RandomSource rng(16);
  auto fw = obfuscate_dnc(rules, 2, Scheme::basic, ctx, rng);
  REQUIRE(fw.parts.size() == 2);
  CHECK(fw.parts[0].units.size() == 32);  // M = N = 2*width = 16 each
  CHECK(counter.encode == 2 * (4 * 32 + 2));
}

TEST_CASE("deterministic artifacts: one seed, identical bytes") {
  std::vector<BitRule> rules{toy_rule("10110000", "00000011")};
  auto ctx = transparent_ctx();
  RandomSource r1(17), r2(17), r3(18);
  auto fw1 = obfuscate_naive(rules, ctx, r1);
  auto fw2 = obfuscate_naive(rules, ctx, r2);
  auto fw3 = obfuscate_naive(rules, ctx, r3);
  CHECK(firewall_to_json(fw1) == firewall_to_json(fw2));
  CHECK(firewall_to_json(fw1) != firewall_to_json(fw3));

  ObfuscateContext clt_ctx;
  clt_ctx.backend = Backend::clt;
  RandomSource c1(19), c2(19);
  auto cf1 = obfuscate_basic(rules, BasicSchemeConfig{8, 8}, clt_ctx, c1);
  auto cf2 = obfuscate_basic(rules, BasicSchemeConfig{8, 8}, clt_ctx, c2);
  CHECK(firewall_to_json(cf1) == firewall_to_json(cf2));
}

TEST_CASE("unit index collisions across two rules match the closed form") {
  const std::uint32_t m_units = 8, n_units = 8;
  std::vector<BitRule> rules{toy_rule("0101", "1010"), toy_rule("1010", "0101")};
  const double predicted =
      leakage_probability(LeakageQuery{m_units, n_units, 2, 2, 4});

  const int trials = 10000;
  int collisions = 0;
  auto ctx = transparent_ctx();
  for (int t = 0; t < trials; ++t) {
    RandomSource rng(100000 + t);
    auto fw = obfuscate_basic(rules, BasicSchemeConfig{m_units, n_units}, ctx, rng);
    const auto& pr1 = std::get<BasicRule>(fw.parts[0].rules[0]).pr;
    const auto& pr2 = std::get<BasicRule>(fw.parts[0].rules[1]).pr;
    const std::set<std::uint32_t> used(pr1.begin(), pr1.end());
    bool hit = false;
    for (auto idx : pr2) hit = hit || used.count(idx) > 0;
    if (hit) ++collisions;
  }
  const double observed = double(collisions) / trials;
  const double sigma = std::sqrt(predicted * (1 - predicted) / trials);
  CHECK(std::abs(observed - predicted) <= 3 * sigma);
}
