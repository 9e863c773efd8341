#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sofa/match.hpp"
#include "sofa/obfuscate.hpp"
#include "sofa/rules.hpp"

namespace sofa {

/// Canonical "sofa/1" firewall file: JSON with lexicographically sorted
/// keys and big integers as base64 of their big-endian magnitudes, so
/// save(load(file)) reproduces the bytes exactly. Contains only public
/// material: parameters, zero tests, units and rule ciphertexts.
std::string firewall_to_json(const ObfuscatedFirewall& fw);
ObfuscatedFirewall firewall_from_json(std::string_view text);

void save_firewall(const ObfuscatedFirewall& fw, const std::string& path);
ObfuscatedFirewall load_firewall(const std::string& path);

/// One packet record per JSONL line. Malformed lines surface as records
/// with ok=false and the parse error; processing continues past them.
struct PacketRecord {
  bool ok = false;
  PacketHeader packet;
  std::string error;
};

std::vector<PacketRecord> parse_packets_jsonl(std::string_view text);
std::vector<PacketRecord> load_packets_jsonl(const std::string& path);

std::string packet_to_json(const PacketHeader& packet);
std::string decision_to_json(std::size_t index, const MatchDecision& decision,
                             bool hide_rule_index);
std::string decision_error_to_json(std::size_t index, const std::string& error);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace sofa
