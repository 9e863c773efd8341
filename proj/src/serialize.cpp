#include "sofa/serialize.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sofa/errors.hpp"
#include "sofa/ges_clt.hpp"

namespace sofa {

using nlohmann::json;

namespace {

constexpr const char* kFormatTag = "sofa/1";
constexpr const char* kB64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t x = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kB64Alphabet[(x >> 18) & 63]);
    out.push_back(kB64Alphabet[(x >> 12) & 63]);
    out.push_back(kB64Alphabet[(x >> 6) & 63]);
    out.push_back(kB64Alphabet[x & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t x = bytes[i] << 16;
    out.push_back(kB64Alphabet[(x >> 18) & 63]);
    out.push_back(kB64Alphabet[(x >> 12) & 63]);
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t x = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kB64Alphabet[(x >> 18) & 63]);
    out.push_back(kB64Alphabet[(x >> 12) & 63]);
    out.push_back(kB64Alphabet[(x >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  static const auto value_of = [] {
    std::array<std::int8_t, 256> table{};
    table.fill(-1);
    for (int i = 0; i < 64; ++i) table[static_cast<unsigned char>(kB64Alphabet[i])] = i;
    return table;
  }();
  if (text.size() % 4 != 0) throw IntegrityError("base64: length not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t x = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        if (i + 4 != text.size() || j < 2) throw IntegrityError("base64: stray padding");
        ++pad;
        x <<= 6;
        continue;
      }
      if (pad > 0) throw IntegrityError("base64: data after padding");
      const std::int8_t v = value_of[static_cast<unsigned char>(c)];
      if (v < 0) throw IntegrityError("base64: invalid character");
      x = (x << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back((x >> 16) & 0xff);
    if (pad < 2) out.push_back((x >> 8) & 0xff);
    if (pad < 1) out.push_back(x & 0xff);
  }
  return out;
}

namespace {

std::string mpz_to_b64(const mpz_class& value) { return base64_encode(mpz_bytes(value)); }

mpz_class mpz_from_b64(const std::string& text) {
  const auto bytes = base64_decode(text);
  return mpz_from_bytes(bytes.data(), bytes.size());
}

std::string mode_name(const std::optional<Mode>& mode) {
  if (!mode) return "raw";
  return *mode == Mode::standard ? "standard" : "extended";
}

std::optional<Mode> mode_from_name(const std::string& name) {
  if (name == "standard") return Mode::standard;
  if (name == "extended") return Mode::extended;
  if (name == "raw") return std::nullopt;
  throw IntegrityError("unknown mode '" + name + "'");
}

json encoding_to_json(const Encoding& e) {
  return json{{"b", mpz_to_b64(e.payload)}, {"l", e.level}, {"nb", e.noise_bits}};
}

Encoding encoding_from_json(const json& j, const Ges& ges, const std::string& where) {
  Encoding e;
  try {
    e.payload = mpz_from_b64(j.at("b").get<std::string>());
  } catch (const IntegrityError& err) {
    throw IntegrityError(where + ": " + err.what());
  }
  e.level = j.at("l").get<std::uint32_t>();
  e.noise_bits = j.at("nb").get<std::uint32_t>();
  if (e.level > ges.kappa()) throw IntegrityError(where + ": encoding level exceeds kappa");
  if (e.payload >= ges.modulus()) {
    throw IntegrityError(where + ": encoding payload exceeds the modulus");
  }
  return e;
}

json pair_to_json(const EncodingPair& p) {
  return json{{"u", encoding_to_json(p.u)}, {"v", encoding_to_json(p.v)}};
}

EncodingPair pair_from_json(const json& j, const Ges& ges, const std::string& where) {
  EncodingPair p;
  p.u = encoding_from_json(j.at("u"), ges, where);
  p.v = encoding_from_json(j.at("v"), ges, where);
  return p;
}

json unit_to_json(const EncodingPairUnit& unit) {
  return json{{"u0", encoding_to_json(unit.bit0.u)},
              {"v0", encoding_to_json(unit.bit0.v)},
              {"u1", encoding_to_json(unit.bit1.u)},
              {"v1", encoding_to_json(unit.bit1.v)}};
}

EncodingPairUnit unit_from_json(const json& j, const Ges& ges, const std::string& where) {
  EncodingPairUnit unit;
  unit.bit0.u = encoding_from_json(j.at("u0"), ges, where);
  unit.bit0.v = encoding_from_json(j.at("v0"), ges, where);
  unit.bit1.u = encoding_from_json(j.at("u1"), ges, where);
  unit.bit1.v = encoding_from_json(j.at("v1"), ges, where);
  return unit;
}

json ges_to_json(const Ges& ges) {
  json j;
  j["backend"] = to_string(ges.backend());
  j["kappa"] = ges.kappa();
  if (ges.backend() == Backend::transparent) {
    j["q"] = mpz_to_b64(ges.modulus());
  } else {
    const auto& clt = dynamic_cast<const CltGes&>(ges);
    j["x0"] = mpz_to_b64(ges.modulus());
    j["nu"] = clt.nu();
  }
  return j;
}

std::shared_ptr<const Ges> ges_from_json(const json& j) {
  const auto backend = j.at("backend").get<std::string>();
  const auto kappa = j.at("kappa").get<std::uint32_t>();
  if (backend == "transparent") {
    try {
      return transparent_public(kappa, mpz_from_b64(j.at("q").get<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw IntegrityError(std::string("ges parameters: ") + e.what());
    }
  }
  if (backend == "clt") {
    CltPublicParams params;
    params.x0 = mpz_from_b64(j.at("x0").get<std::string>());
    params.kappa = kappa;
    params.nu = j.at("nu").get<std::uint32_t>();
    try {
      return clt_public(std::move(params));
    } catch (const std::invalid_argument& e) {
      throw IntegrityError(std::string("ges parameters: ") + e.what());
    }
  }
  throw IntegrityError("unknown backend '" + backend + "'");
}

json layout_to_json(const FieldLayout& layout) {
  json fields = json::array();
  for (const auto& f : layout.fields) {
    fields.push_back(json{{"name", f.name}, {"width", f.width_bits}});
  }
  return json{{"fields", std::move(fields)}, {"mode", mode_name(layout.mode)}};
}

FieldLayout layout_from_json(const json& j) {
  FieldLayout layout;
  layout.mode = mode_from_name(j.at("mode").get<std::string>());
  for (const auto& f : j.at("fields")) {
    layout.fields.push_back({f.at("name").get<std::string>(), f.at("width").get<std::uint32_t>()});
  }
  return layout;
}

json rule_to_json(const ObfuscatedRule& rule) {
  json j;
  if (const auto* naive = std::get_if<NaiveRule>(&rule)) {
    json units = json::array();
    for (const auto& u : naive->units) units.push_back(unit_to_json(u));
    j["units"] = std::move(units);
    j["u"] = encoding_to_json(naive->last.u);
    j["v"] = encoding_to_json(naive->last.v);
  } else if (const auto* basic = std::get_if<BasicRule>(&rule)) {
    j["pr"] = basic->pr;
    j["u"] = encoding_to_json(basic->last.u);
    j["v"] = encoding_to_json(basic->last.v);
  } else {
    const auto& blocking = std::get<BlockingRule>(rule);
    json fields = json::array();
    for (const auto& table : blocking.fields) {
      json entries = json::array();
      for (const auto& pair : table) entries.push_back(pair_to_json(pair));
      fields.push_back(std::move(entries));
    }
    j["fields"] = std::move(fields);
    j["u"] = encoding_to_json(blocking.last.u);
    j["v"] = encoding_to_json(blocking.last.v);
  }
  return j;
}

json part_to_json(const FirewallPart& part) {
  json j;
  j["scheme"] = to_string(part.scheme);
  j["offset"] = part.bit_offset;
  j["width"] = part.width;
  j["ges"] = ges_to_json(*part.ges);
  j["pzt"] = mpz_to_b64(part.pzt.value);
  if (part.scheme == Scheme::basic) {
    json units = json::array();
    for (const auto& u : part.units) units.push_back(unit_to_json(u));
    j["units"] = std::move(units);
  }
  json rules = json::array();
  for (const auto& r : part.rules) rules.push_back(rule_to_json(r));
  j["rules"] = std::move(rules);
  return j;
}

FirewallPart part_from_json(const json& j, const std::optional<FieldLayout>& layout) {
  FirewallPart part;
  part.scheme = scheme_from_string(j.at("scheme").get<std::string>());
  part.bit_offset = j.at("offset").get<std::uint32_t>();
  part.width = j.at("width").get<std::uint32_t>();
  part.ges = ges_from_json(j.at("ges"));
  try {
    part.pzt.value = mpz_from_b64(j.at("pzt").get<std::string>());
  } catch (const IntegrityError& e) {
    throw IntegrityError(std::string("zero-test parameter: ") + e.what());
  }

  const Ges& ges = *part.ges;
  if (part.scheme == Scheme::basic) {
    std::size_t u = 0;
    for (const auto& unit : j.at("units")) {
      part.units.push_back(unit_from_json(unit, ges, "unit " + std::to_string(u)));
      ++u;
    }
  }
  std::size_t r = 0;
  for (const auto& rule : j.at("rules")) {
    const std::string where = "rule " + std::to_string(r);
    switch (part.scheme) {
      case Scheme::naive: {
        NaiveRule out;
        for (const auto& unit : rule.at("units")) {
          out.units.push_back(unit_from_json(unit, ges, where));
        }
        if (out.units.size() != part.width) {
          throw IntegrityError(where + ": unit count does not match the part width");
        }
        out.last.u = encoding_from_json(rule.at("u"), ges, where);
        out.last.v = encoding_from_json(rule.at("v"), ges, where);
        part.rules.emplace_back(std::move(out));
        break;
      }
      case Scheme::basic: {
        BasicRule out;
        out.pr = rule.at("pr").get<std::vector<std::uint32_t>>();
        if (out.pr.size() != part.width) {
          throw IntegrityError(where + ": index array does not match the part width");
        }
        for (auto idx : out.pr) {
          if (idx >= part.units.size()) {
            throw IntegrityError(where + ": unit index out of range");
          }
        }
        out.last.u = encoding_from_json(rule.at("u"), ges, where);
        out.last.v = encoding_from_json(rule.at("v"), ges, where);
        part.rules.emplace_back(std::move(out));
        break;
      }
      case Scheme::blocking: {
        BlockingRule out;
        if (!layout) throw IntegrityError("blocking part without a layout");
        std::size_t i = 0;
        for (const auto& table : rule.at("fields")) {
          std::vector<EncodingPair> entries;
          for (const auto& pair : table) entries.push_back(pair_from_json(pair, ges, where));
          if (i >= layout->k() || entries.size() != layout->domain_size(i)) {
            throw IntegrityError(where + ": field table does not match the layout");
          }
          out.fields.push_back(std::move(entries));
          ++i;
        }
        if (out.fields.size() != layout->k()) {
          throw IntegrityError(where + ": field count does not match the layout");
        }
        out.last.u = encoding_from_json(rule.at("u"), ges, where);
        out.last.v = encoding_from_json(rule.at("v"), ges, where);
        part.rules.emplace_back(std::move(out));
        break;
      }
      case Scheme::dnc:
        throw IntegrityError("parts cannot nest");
    }
    ++r;
  }
  return part;
}

Action action_from_name(const std::string& name) {
  if (name == "permit") return make_action(ActionKind::permit);
  if (name == "deny") return make_action(ActionKind::deny);
  throw IntegrityError("unknown action '" + name + "'");
}

}  // namespace

std::string firewall_to_json(const ObfuscatedFirewall& fw) {
  json j;
  j["format"] = kFormatTag;
  j["scheme"] = to_string(fw.scheme);
  if (fw.scheme == Scheme::dnc) j["inner"] = to_string(fw.inner);
  j["mode"] = mode_name(fw.mode);
  j["width"] = fw.width;
  if (fw.layout) j["layout"] = layout_to_json(*fw.layout);
  json actions = json::array();
  for (const auto& a : fw.actions) actions.push_back(make_action(a.kind).raw);
  j["actions"] = std::move(actions);
  j["default_action"] = make_action(fw.default_action.kind).raw;
  json parts = json::array();
  for (const auto& p : fw.parts) parts.push_back(part_to_json(p));
  j["parts"] = std::move(parts);
  return j.dump(1);
}

ObfuscatedFirewall firewall_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("firewall file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.contains("format") || j.at("format").get<std::string>() != kFormatTag) {
      throw InputError("firewall file format-version mismatch (expected sofa/1)");
    }
    ObfuscatedFirewall fw;
    fw.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    if (fw.scheme == Scheme::dnc) fw.inner = scheme_from_string(j.at("inner").get<std::string>());
    fw.mode = mode_from_name(j.at("mode").get<std::string>());
    fw.width = j.at("width").get<std::uint32_t>();
    if (j.contains("layout")) fw.layout = layout_from_json(j.at("layout"));
    for (const auto& a : j.at("actions")) fw.actions.push_back(action_from_name(a.get<std::string>()));
    fw.default_action = action_from_name(j.at("default_action").get<std::string>());
    for (const auto& p : j.at("parts")) fw.parts.push_back(part_from_json(p, fw.layout));

    for (const auto& part : fw.parts) {
      if (part.rules.size() != fw.actions.size()) {
        throw IntegrityError("part rule count does not match the action list");
      }
    }
    return fw;
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("firewall file structure: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw InputError("short write to '" + path + "'");
}

void save_firewall(const ObfuscatedFirewall& fw, const std::string& path) {
  write_file(path, firewall_to_json(fw));
}

ObfuscatedFirewall load_firewall(const std::string& path) {
  return firewall_from_json(read_file(path));
}

namespace {

PacketHeader packet_from_json_value(const json& j) {
  PacketHeader p;
  auto ip_field = [&](const char* key) -> std::uint32_t {
    const auto& v = j.at(key);
    if (v.is_string()) return parse_ip(v.get<std::string>());
    return v.get<std::uint32_t>();
  };
  p.src_ip = ip_field("src_ip");
  p.dst_ip = ip_field("dst_ip");
  p.src_port = j.at("src_port").get<std::uint16_t>();
  p.dst_port = j.at("dst_port").get<std::uint16_t>();
  const auto& proto = j.at("proto");
  if (proto.is_string()) {
    const std::string name = proto.get<std::string>();
    if (name == "TCP" || name == "tcp") {
      p.proto = 6;
    } else if (name == "UDP" || name == "udp") {
      p.proto = 17;
    } else if (name == "ICMP" || name == "icmp") {
      p.proto = 1;
    } else {
      throw InputError("unknown proto '" + name + "'");
    }
  } else {
    p.proto = proto.get<std::uint8_t>();
  }
  return p;
}

}  // namespace

std::vector<PacketRecord> parse_packets_jsonl(std::string_view text) {
  std::vector<PacketRecord> records;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    PacketRecord record;
    try {
      record.packet = packet_from_json_value(json::parse(line));
      record.ok = true;
    } catch (const std::exception& e) {
      record.ok = false;
      record.error = e.what();
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<PacketRecord> load_packets_jsonl(const std::string& path) {
  return parse_packets_jsonl(read_file(path));
}

std::string packet_to_json(const PacketHeader& packet) {
  json j;
  j["src_ip"] = format_ip(packet.src_ip);
  j["src_port"] = packet.src_port;
  j["dst_ip"] = format_ip(packet.dst_ip);
  j["dst_port"] = packet.dst_port;
  if (packet.proto == 6) {
    j["proto"] = "TCP";
  } else if (packet.proto == 17) {
    j["proto"] = "UDP";
  } else if (packet.proto == 1) {
    j["proto"] = "ICMP";
  } else {
    j["proto"] = packet.proto;
  }
  return j.dump();
}

std::string decision_to_json(std::size_t index, const MatchDecision& decision,
                             bool hide_rule_index) {
  json j;
  j["index"] = index;
  j["action"] = make_action(decision.action.kind).raw;
  if (decision.rule_index && !hide_rule_index) j["rule"] = *decision.rule_index;
  return j.dump();
}

std::string decision_error_to_json(std::size_t index, const std::string& error) {
  json j;
  j["index"] = index;
  j["error"] = error;
  return j.dump();
}

}  // namespace sofa
