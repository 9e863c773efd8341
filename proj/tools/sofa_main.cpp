#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sofa/analysis.hpp"
#include "sofa/errors.hpp"
#include "sofa/ges_clt.hpp"
#include "sofa/match.hpp"
#include "sofa/obfuscate.hpp"
#include "sofa/serialize.hpp"

namespace {

using namespace sofa;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitVerifyFailed = 3;
constexpr int kExitIntegrity = 4;

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

Backend backend_from_name(const std::string& name) {
  if (name == "transparent") return Backend::transparent;
  if (name == "clt") return Backend::clt;
  throw InputError("unknown backend '" + name + "' (expected transparent or clt)");
}

Mode mode_from_name_strict(const std::string& name) {
  if (name == "standard") return Mode::standard;
  if (name == "extended") return Mode::extended;
  throw InputError("unknown mode '" + name + "' (expected standard or extended)");
}

std::vector<AclRule> load_rules(const std::string& path) {
  return parse_acl(read_file(path));
}

std::vector<BitRule> compile_all_bits(const std::vector<AclRule>& rules, Mode mode) {
  std::vector<BitRule> out;
  out.reserve(rules.size());
  for (const auto& r : rules) out.push_back(compile_bit(r, mode));
  return out;
}

std::vector<BlockRuleSpec> compile_all_blocks(const std::vector<AclRule>& rules,
                                              const FieldLayout& layout) {
  std::vector<BlockRuleSpec> out;
  out.reserve(rules.size());
  for (const auto& r : rules) out.push_back(compile_block(r, layout));
  return out;
}

std::uint32_t max_kappa(const ObfuscatedFirewall& fw) {
  std::uint32_t k = 0;
  for (const auto& p : fw.parts) k = std::max(k, p.ges->kappa());
  return k;
}

struct ObfuscateArgs {
  std::string scheme;
  std::string rules_path;
  std::string out_path;
  std::string backend = "clt";
  std::string mode = "standard";
  std::string default_action = "deny";
  std::uint32_t m_units = 0;
  std::uint32_t n_units = 0;
  std::uint32_t parts = 4;
  std::string inner = "basic";
  bool allow_remainder = false;
  std::uint32_t lambda = 12;
  std::uint64_t seed = 1;
  std::uint32_t domain_cap = 4096;
};

ObfuscatedFirewall build_firewall(const ObfuscateArgs& args, const std::vector<AclRule>& acl,
                                  RandomSource& rng, OpCounter* counter) {
  const Scheme scheme = scheme_from_string(args.scheme);
  const Mode mode = mode_from_name_strict(args.mode);

  ObfuscateContext ctx;
  ctx.lambda = args.lambda;
  ctx.backend = backend_from_name(args.backend);
  ctx.default_action = action_from_token(args.default_action);
  ctx.mode = mode;
  ctx.blocking_domain_cap = args.domain_cap;
  ctx.counter = counter;

  switch (scheme) {
    case Scheme::naive:
      return obfuscate_naive(compile_all_bits(acl, mode), ctx, rng);
    case Scheme::basic: {
      auto bits = compile_all_bits(acl, mode);
      const std::uint32_t n = bits.empty() ? mode_bits(mode) : bits.front().n();
      BasicSchemeConfig cfg{args.m_units ? args.m_units : 2 * n,
                            args.n_units ? args.n_units : 2 * n};
      return obfuscate_basic(bits, cfg, ctx, rng);
    }
    case Scheme::blocking: {
      if (mode != Mode::standard) {
        throw InputError("blocking: only the standard (4-octet) mode is supported");
      }
      const FieldLayout layout = octet_layout();
      return obfuscate_blocking(compile_all_blocks(acl, layout), layout, ctx, rng);
    }
    case Scheme::dnc: {
      auto bits = compile_all_bits(acl, mode);
      std::optional<BasicSchemeConfig> cfg;
      if (args.m_units || args.n_units) {
        cfg = BasicSchemeConfig{args.m_units, args.n_units};
      }
      return obfuscate_dnc(bits, args.parts, scheme_from_string(args.inner), ctx, rng,
                           args.allow_remainder, cfg);
    }
  }
  throw InputError("unknown scheme");
}

int cmd_obfuscate(const ObfuscateArgs& args) {
  const auto acl = load_rules(args.rules_path);
  RandomSource rng(args.seed);
  OpCounter counter;
  const auto start = std::chrono::steady_clock::now();
  ObfuscatedFirewall fw = build_firewall(args, acl, rng, &counter);
  const double elapsed = ms_since(start);
  save_firewall(fw, args.out_path);

  std::cout << "seed: " << args.seed << "\n";
  std::cout << "scheme: " << to_string(fw.scheme);
  if (fw.scheme == Scheme::dnc) std::cout << " (inner " << to_string(fw.inner) << ")";
  std::cout << "\nrules: " << fw.rule_count() << "\n";
  for (const auto& part : fw.parts) {
    std::cout << "part offset=" << part.bit_offset << " kappa=" << part.ges->kappa()
              << " backend=" << to_string(part.ges->backend());
    if (part.ges->backend() == Backend::clt && part.pzt.calibration_margin > 0) {
      std::cout << " calibration_margin=" << part.pzt.calibration_margin;
    }
    std::cout << "\n";
  }
  std::cout << "ops: samp=" << counter.samp << " encode=" << counter.encode
            << " re_rand=" << counter.re_rand << " mul=" << counter.mul << "\n";
  std::cout << "elapsed_ms: " << elapsed << "\n";
  std::cout << "wrote " << args.out_path << "\n";
  return kExitOk;
}

struct FilterArgs {
  std::string firewall_path;
  std::string packets_path;
  std::string out_path;
  bool hide_rule_index = false;
  unsigned threads = 1;
};

int cmd_filter(const FilterArgs& args) {
  const ObfuscatedFirewall fw = load_firewall(args.firewall_path);
  const auto records = load_packets_jsonl(args.packets_path);

  std::vector<PacketHeader> ok_packets;
  std::vector<std::size_t> ok_indices;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].ok) {
      ok_packets.push_back(records[i].packet);
      ok_indices.push_back(i);
    }
  }
  const auto decisions = filter_stream(fw, ok_packets, args.threads);

  std::ostringstream out;
  std::size_t next_ok = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].ok) {
      out << decision_to_json(i, decisions[next_ok++], args.hide_rule_index) << "\n";
    } else {
      out << decision_error_to_json(i, records[i].error) << "\n";
    }
  }
  if (args.out_path.empty()) {
    std::cout << out.str();
  } else {
    write_file(args.out_path, out.str());
  }
  return kExitOk;
}

struct VerifyArgs {
  std::string rules_path;
  std::string firewall_path;
  std::string packets_path;
  std::uint32_t exhaustive_bits = 0;
  std::uint64_t random_count = 0;
  std::uint64_t seed = 1;
};

int cmd_verify(const VerifyArgs& args) {
  const ObfuscatedFirewall fw = load_firewall(args.firewall_path);
  const auto acl = load_rules(args.rules_path);

  if (acl.size() != fw.rule_count()) {
    throw InputError("rules/firewall mismatch: " + std::to_string(acl.size()) + " rules vs " +
                     std::to_string(fw.rule_count()) + " obfuscated rules");
  }
  for (std::size_t i = 0; i < acl.size(); ++i) {
    if (acl[i].action.kind != fw.actions[i].kind) {
      throw InputError("rules/firewall mismatch: action of rule " + std::to_string(i) +
                       " differs");
    }
  }
  if (!fw.mode) throw InputError("verify: firewall covers a raw bit region");
  const Mode mode = *fw.mode;

  std::vector<BitRule> bit_rules;
  std::vector<BlockRuleSpec> block_rules;
  if (fw.scheme == Scheme::blocking) {
    if (!fw.layout) throw IntegrityError("blocking firewall without a layout");
    block_rules = compile_all_blocks(acl, *fw.layout);
  } else {
    bit_rules = compile_all_bits(acl, mode);
  }

  std::vector<PacketHeader> packets;
  if (!args.packets_path.empty()) {
    for (const auto& record : load_packets_jsonl(args.packets_path)) {
      if (record.ok) packets.push_back(record.packet);
    }
  } else if (args.exhaustive_bits > 0) {
    if (args.exhaustive_bits > 24) throw InputError("verify: --exhaustive-bits must be <= 24");
    for (std::uint64_t v = 0; v < (1ULL << args.exhaustive_bits); ++v) {
      PacketHeader p;
      p.src_ip = static_cast<std::uint32_t>(v << (32 - args.exhaustive_bits));
      packets.push_back(p);
    }
  } else if (args.random_count > 0) {
    RandomSource rng(args.seed);
    for (std::uint64_t i = 0; i < args.random_count; ++i) {
      // Half the stream is drawn from rule match sets so hits are exercised.
      if (!acl.empty() && rng.below_u64(2) == 0) {
        packets.push_back(
            random_packet_matching(acl[rng.below_u64(acl.size())], rng));
      } else {
        packets.push_back(random_packet(rng));
      }
    }
  } else {
    throw InputError("verify: provide --packets, --exhaustive-bits or --random");
  }

  std::uint64_t agree = 0;
  std::vector<std::string> disagreements;
  for (std::size_t i = 0; i < packets.size(); ++i) {
    MatchDecision expected =
        fw.scheme == Scheme::blocking
            ? oracle_filter(block_rules, packet_tuple(packets[i], *fw.layout), fw.default_action)
            : oracle_filter(bit_rules, packet_bits(packets[i], mode), fw.default_action);
    MatchDecision got = filter_packet(fw, packets[i]);
    if (expected.action.kind == got.action.kind && expected.rule_index == got.rule_index) {
      ++agree;
    } else if (disagreements.size() < 20) {
      std::ostringstream line;
      line << "packet " << i << " (" << packet_to_json(packets[i]) << "): oracle "
           << make_action(expected.action.kind).raw
           << (expected.rule_index ? "@" + std::to_string(*expected.rule_index) : "@default")
           << " vs firewall " << make_action(got.action.kind).raw
           << (got.rule_index ? "@" + std::to_string(*got.rule_index) : "@default");
      disagreements.push_back(line.str());
    }
  }

  const std::uint64_t disagree = packets.size() - agree;
  if (args.packets_path.empty() && args.exhaustive_bits == 0) {
    std::cout << "seed: " << args.seed << "\n";
  }
  std::cout << "packets: " << packets.size() << "\nagree: " << agree
            << "\ndisagree: " << disagree << "\n";
  for (const auto& d : disagreements) std::cout << "  " << d << "\n";
  return disagree == 0 ? kExitOk : kExitVerifyFailed;
}

struct LeakageArgs {
  std::uint64_t m_units = 0;
  std::uint64_t n_units = 0;
  std::uint32_t w1 = 0;
  std::uint32_t w2 = 0;
  std::uint32_t n = 0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 1;
};

int cmd_leakage(const LeakageArgs& args) {
  LeakageQuery query{args.m_units, args.n_units, args.w1, args.w2, args.n};
  nlohmann::json out;
  out["closed_form"] = leakage_probability(query);
  if (args.trials > 0) {
    RandomSource rng(args.seed);
    const auto mc = leakage_monte_carlo(query, args.trials, rng);
    out["monte_carlo"] = mc.estimate;
    out["std_error"] = mc.std_error;
    out["trials"] = mc.trials;
  }
  std::cout << out.dump() << "\n";
  return kExitOk;
}

struct BenchArgs {
  std::string schemes = "basic,dnc,blocking";
  std::string rules_path;
  std::uint64_t packet_count = 100;
  std::string backend = "clt";
  std::uint32_t repeat = 3;
  std::string out_path;
  std::string rule_counts;
  std::uint64_t seed = 1;
};

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_bench(const BenchArgs& args) {
  const auto acl = load_rules(args.rules_path);
  if (acl.empty()) throw InputError("bench: rules file is empty");

  std::vector<std::size_t> rule_counts;
  if (args.rule_counts.empty()) {
    rule_counts.push_back(acl.size());
  } else {
    for (const auto& item : split_csv(args.rule_counts)) {
      const auto l = static_cast<std::size_t>(std::stoull(item));
      if (l == 0 || l > acl.size()) {
        throw InputError("bench: rule count " + item + " out of range (file has " +
                         std::to_string(acl.size()) + ")");
      }
      rule_counts.push_back(l);
    }
  }

  std::cerr << "seed: " << args.seed << "\n";  // stderr keeps stdout CSV-clean
  std::ostringstream csv;
  csv << "scheme,backend,kappa,rule_count,phase,repeats,items,min_ms,median_ms,max_ms,"
         "ms_per_item,samp,encode,re_rand,add,neg,mul,is_zero\n";

  auto median = [](std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
  };

  for (const auto& scheme_name : split_csv(args.schemes)) {
    for (const std::size_t l : rule_counts) {
      const std::vector<AclRule> subset(acl.begin(), acl.begin() + l);

      ObfuscateArgs oargs;
      oargs.scheme = scheme_name;
      oargs.backend = args.backend;
      oargs.seed = args.seed;

      std::vector<double> obf_times;
      OpCounter obf_counter;
      ObfuscatedFirewall fw;
      for (std::uint32_t rep = 0; rep < args.repeat; ++rep) {
        RandomSource rng(args.seed);
        OpCounter counter;
        const auto start = std::chrono::steady_clock::now();
        fw = build_firewall(oargs, subset, rng, &counter);
        obf_times.push_back(ms_since(start));
        obf_counter = counter;
      }

      RandomSource packet_rng(args.seed + 1);
      std::vector<PacketHeader> packets;
      packets.reserve(args.packet_count);
      for (std::uint64_t i = 0; i < args.packet_count; ++i) {
        if (packet_rng.below_u64(2) == 0) {
          packets.push_back(
              random_packet_matching(subset[packet_rng.below_u64(subset.size())], packet_rng));
        } else {
          packets.push_back(random_packet(packet_rng));
        }
      }

      std::vector<double> filter_times;
      OpCounter filter_counter;
      for (std::uint32_t rep = 0; rep < args.repeat; ++rep) {
        OpCounter counter;
        const auto start = std::chrono::steady_clock::now();
        filter_stream(fw, packets, 1, &counter);
        filter_times.push_back(ms_since(start));
        filter_counter = counter;
      }

      const auto kappa = max_kappa(fw);
      auto emit = [&](const char* phase, const std::vector<double>& times, std::uint64_t items,
                      const OpCounter& ops) {
        const double med = median(times);
        csv << scheme_name << "," << args.backend << "," << kappa << "," << l << "," << phase
            << "," << args.repeat << "," << items << ","
            << *std::min_element(times.begin(), times.end()) << "," << med << ","
            << *std::max_element(times.begin(), times.end()) << ","
            << (items ? med / static_cast<double>(items) : 0.0) << "," << ops.samp << ","
            << ops.encode << "," << ops.re_rand << "," << ops.add << "," << ops.neg << ","
            << ops.mul << "," << ops.is_zero << "\n";
      };
      emit("obfuscate", obf_times, l, obf_counter);
      emit("filter", filter_times, packets.size(), filter_counter);
    }
  }

  if (args.out_path.empty()) {
    std::cout << csv.str();
  } else {
    write_file(args.out_path, csv.str());
    std::cout << "wrote " << args.out_path << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sofa: compile firewall ACLs into obfuscated form and run them"};
  app.require_subcommand(1);

  ObfuscateArgs oargs;
  auto* obf = app.add_subcommand("obfuscate", "compile an ACL into an obfuscated firewall");
  obf->add_option("--scheme", oargs.scheme, "naive|basic|blocking|dnc")->required();
  obf->add_option("--rules", oargs.rules_path, "ACL text file")->required();
  obf->add_option("--out", oargs.out_path, "output firewall file")->required();
  obf->add_option("--backend", oargs.backend, "transparent|clt (default clt)");
  obf->add_option("--mode", oargs.mode, "standard|extended (default standard)");
  obf->add_option("--M", oargs.m_units, "basic: equal-ratio unit count (default 2n)");
  obf->add_option("--N", oargs.n_units, "basic: unequal-ratio unit count (default 2n)");
  obf->add_option("--parts", oargs.parts, "dnc: part count (default 4)");
  obf->add_option("--inner", oargs.inner, "dnc: inner scheme naive|basic (default basic)");
  obf->add_flag("--allow-remainder", oargs.allow_remainder,
                "dnc: let the last part absorb leftover bits");
  obf->add_option("--lambda", oargs.lambda, "security parameter (default 12)");
  obf->add_option("--seed", oargs.seed, "randomness seed (default 1)");
  obf->add_option("--default-action", oargs.default_action,
                  "action when no rule matches (default deny)");
  obf->add_option("--domain-cap", oargs.domain_cap,
                  "blocking: max sum of field domains per rule (default 4096)");

  FilterArgs fargs;
  auto* fil = app.add_subcommand("filter", "run packets through an obfuscated firewall");
  fil->add_option("--firewall", fargs.firewall_path, "firewall file")->required();
  fil->add_option("--packets", fargs.packets_path, "packets JSONL file")->required();
  fil->add_option("--out", fargs.out_path, "decisions JSONL file (default stdout)");
  fil->add_flag("--hide-rule-index", fargs.hide_rule_index,
                "omit matched rule indexes from decisions");
  fil->add_option("--threads", fargs.threads, "worker threads (default 1)");

  VerifyArgs vargs;
  auto* ver = app.add_subcommand("verify", "compare firewall decisions against the plain rules");
  ver->add_option("--rules", vargs.rules_path, "ACL text file")->required();
  ver->add_option("--firewall", vargs.firewall_path, "firewall file")->required();
  ver->add_option("--packets", vargs.packets_path, "packets JSONL file");
  ver->add_option("--exhaustive-bits", vargs.exhaustive_bits,
                  "exhaust the top B source-address bits (B <= 24)");
  ver->add_option("--random", vargs.random_count, "seeded random packet count");
  ver->add_option("--seed", vargs.seed, "seed for --random (default 1)");

  LeakageArgs largs;
  auto* leak = app.add_subcommand("leakage", "basic-scheme index-collision probability");
  leak->add_option("--M", largs.m_units, "equal-ratio unit count")->required();
  leak->add_option("--N", largs.n_units, "unequal-ratio unit count")->required();
  leak->add_option("--w1", largs.w1, "wildcard count of rule 1")->required();
  leak->add_option("--w2", largs.w2, "wildcard count of rule 2")->required();
  leak->add_option("--n", largs.n, "rule width in bits")->required();
  leak->add_option("--trials", largs.trials, "Monte Carlo trials (default 0 = closed form only)");
  leak->add_option("--seed", largs.seed, "Monte Carlo seed (default 1)");

  BenchArgs bargs;
  auto* ben = app.add_subcommand("bench", "time obfuscation and filtering, write CSV");
  ben->add_option("--schemes", bargs.schemes, "csv list (default basic,dnc,blocking)");
  ben->add_option("--rules", bargs.rules_path, "ACL text file")->required();
  ben->add_option("--packets", bargs.packet_count, "packet count per filter run (default 100)");
  ben->add_option("--backend", bargs.backend, "transparent|clt (default clt)");
  ben->add_option("--repeat", bargs.repeat, "repetitions per cell (default 3)");
  ben->add_option("--out", bargs.out_path, "CSV output path (default stdout)");
  ben->add_option("--rule-counts", bargs.rule_counts, "csv rule-count prefixes (default all)");
  ben->add_option("--seed", bargs.seed, "randomness seed (default 1)");

  try {
    app.parse(argc, argv);
    if (obf->parsed()) return cmd_obfuscate(oargs);
    if (fil->parsed()) return cmd_filter(fargs);
    if (ver->parsed()) return cmd_verify(vargs);
    if (leak->parsed()) return cmd_leakage(largs);
    if (ben->parsed()) return cmd_bench(bargs);
    return kExitInput;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return kExitIntegrity;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CalibrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
