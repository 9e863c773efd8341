#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "sofa/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kAcl =
    "deny 192.168.45.* * * * *\n"
    "permit 10.*.*.* * * * *\n"
    "deny 172.16.3.* * * * *\n"
    "permit 172.16.*.* * * * *\n";

// Same actions in the same order, different addresses: passes the
// correspondence precheck but disagrees on traffic.
const char* kAclTwisted =
    "deny 192.168.46.* * * * *\n"
    "permit 11.*.*.* * * * *\n"
    "deny 172.17.3.* * * * *\n"
    "permit 172.17.*.* * * * *\n";

const char* kPackets =
    "{\"src_ip\":\"192.168.45.7\",\"src_port\":1,\"dst_ip\":\"1.1.1.1\",\"dst_port\":2,"
    "\"proto\":\"TCP\"}\n"
    "{\"src_ip\":\"10.9.9.9\",\"src_port\":1,\"dst_ip\":\"1.1.1.1\",\"dst_port\":2,"
    "\"proto\":\"UDP\"}\n"
    "garbage line\n"
    "{\"src_ip\":\"55.55.55.55\",\"src_port\":1,\"dst_ip\":\"1.1.1.1\",\"dst_port\":2,"
    "\"proto\":1}\n";

struct RunResult {
  int code = -1;
  std::string output;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "sofa_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run_cli(const std::string& args) {
  const fs::path capture = work_dir() / "capture.txt";
  const std::string cmd =
      std::string(SOFA_CLI_PATH) + " " + args + " > " + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = sofa::read_file(capture.string());
  return result;
}

std::string path_of(const char* name) { return (work_dir() / name).string(); }

void write(const char* name, const std::string& contents) {
  sofa::write_file(path_of(name), contents);
}

}  // namespace

TEST_CASE("obfuscate - filter - verify pipeline") {
  write("rules.acl", kAcl);
  write("packets.jsonl", kPackets);

  auto obf = run_cli("obfuscate --scheme basic --rules " + path_of("rules.acl") + " --out " +
                     path_of("fw.json") + " --backend transparent --seed 5");
  CHECK(obf.code == 0);
  CHECK(obf.output.find("seed: 5") != std::string::npos);
  CHECK(obf.output.find("encode=") != std::string::npos);

  // determinism: a second run writes identical bytes.
  auto again = run_cli("obfuscate --scheme basic --rules " + path_of("rules.acl") + " --out " +
                       path_of("fw2.json") + " --backend transparent --seed 5");
  CHECK(again.code == 0);
  CHECK(sofa::read_file(path_of("fw.json")) == sofa::read_file(path_of("fw2.json")));

  auto filt = run_cli("filter --firewall " + path_of("fw.json") + " --packets " +
                      path_of("packets.jsonl") + " --out " + path_of("out.jsonl"));
  CHECK(filt.code == 0);
  const std::string decisions = sofa::read_file(path_of("out.jsonl"));
  std::vector<std::string> lines;
  {
    std::istringstream in(decisions);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "{\"action\":\"deny\",\"index\":0,\"rule\":0}");
  CHECK(lines[1] == "{\"action\":\"permit\",\"index\":1,\"rule\":1}");
  CHECK(lines[2].find("\"error\"") != std::string::npos);
  CHECK(lines[2].find("\"index\":2") != std::string::npos);
  CHECK(lines[3] == "{\"action\":\"deny\",\"index\":3}");

  // thread count never changes the output bytes.
  auto threaded = run_cli("filter --firewall " + path_of("fw.json") + " --packets " +
                          path_of("packets.jsonl") + " --out " + path_of("out4.jsonl") +
                          " --threads 4");
  CHECK(threaded.code == 0);
  CHECK(sofa::read_file(path_of("out4.jsonl")) == decisions);

  auto hidden = run_cli("filter --firewall " + path_of("fw.json") + " --packets " +
                        path_of("packets.jsonl") + " --out " + path_of("hid.jsonl") +
                        " --hide-rule-index");
  CHECK(hidden.code == 0);
  CHECK(sofa::read_file(path_of("hid.jsonl")).find("\"rule\"") == std::string::npos);

  auto ver = run_cli("verify --rules " + path_of("rules.acl") + " --firewall " +
                     path_of("fw.json") + " --random 300 --seed 9");
  CHECK(ver.code == 0);
  CHECK(ver.output.find("disagree: 0") != std::string::npos);

  auto exh = run_cli("verify --rules " + path_of("rules.acl") + " --firewall " +
                     path_of("fw.json") + " --exhaustive-bits 8");
  CHECK(exh.code == 0);
  CHECK(exh.output.find("packets: 256") != std::string::npos);
}

TEST_CASE("verify failure and precondition exits") {
  write("rules.acl", kAcl);
  write("twisted.acl", kAclTwisted);
  write("short.acl", "deny 1.2.3.4 * * * *\n");
  run_cli("obfuscate --scheme naive --rules " + path_of("rules.acl") + " --out " +
          path_of("fwv.json") + " --backend transparent --seed 6");

  auto twisted = run_cli("verify --rules " + path_of("twisted.acl") + " --firewall " +
                         path_of("fwv.json") + " --random 400 --seed 1");
  CHECK(twisted.code == 3);

  auto shorter = run_cli("verify --rules " + path_of("short.acl") + " --firewall " +
                         path_of("fwv.json") + " --random 10");
  CHECK(shorter.code == 2);

  auto sourceless = run_cli("verify --rules " + path_of("rules.acl") + " --firewall " +
                            path_of("fwv.json"));
  CHECK(sourceless.code == 2);
}

TEST_CASE("input and integrity error exit codes") {
  write("rules.acl", kAcl);
  write("bad.acl", "deny 192.168.45.256 * * * *\n");

  CHECK(run_cli("obfuscate --scheme nope --rules " + path_of("rules.acl") + " --out " +
                path_of("x.json") + " --backend transparent")
            .code == 2);
  CHECK(run_cli("obfuscate --scheme naive --rules " + path_of("rules.acl") + " --out " +
                path_of("x.json") + " --backend pigeons")
            .code == 2);
  CHECK(run_cli("obfuscate --scheme naive --rules " + path_of("bad.acl") + " --out " +
                path_of("x.json") + " --backend transparent")
            .code == 2);
  auto small_m = run_cli("obfuscate --scheme basic --M 1 --N 64 --rules " + path_of("rules.acl") +
                         " --out " + path_of("x.json") + " --backend transparent");
  CHECK(small_m.code == 2);
  CHECK(small_m.output.find("raise M") != std::string::npos);
  CHECK(run_cli("obfuscate --scheme blocking --mode extended --rules " + path_of("rules.acl") +
                " --out " + path_of("x.json") + " --backend transparent")
            .code == 2);
  CHECK(run_cli("obfuscate --rules " + path_of("rules.acl") + " --out " + path_of("x.json"))
            .code == 2);  // missing required --scheme

  // corrupt one payload: still JSON, fails the integrity checks.
  run_cli("obfuscate --scheme naive --rules " + path_of("rules.acl") + " --out " +
          path_of("fwc.json") + " --backend transparent --seed 6");
  auto j = json::parse(sofa::read_file(path_of("fwc.json")));
  j["parts"][0]["rules"][0]["u"]["b"] = "!!!!";
  write("fwc.json", j.dump(1));
  write("one.jsonl",
        "{\"src_ip\":\"1.1.1.1\",\"src_port\":1,\"dst_ip\":\"2.2.2.2\",\"dst_port\":2,"
        "\"proto\":1}\n");
  auto broken = run_cli("filter --firewall " + path_of("fwc.json") + " --packets " +
                        path_of("one.jsonl"));
  CHECK(broken.code == 4);
}

TEST_CASE("empty packet input produces empty output and success") {
  write("rules.acl", kAcl);
  write("empty.jsonl", "");
  run_cli("obfuscate --scheme naive --rules " + path_of("rules.acl") + " --out " +
          path_of("fwe.json") + " --backend transparent --seed 2");
  auto filt = run_cli("filter --firewall " + path_of("fwe.json") + " --packets " +
                      path_of("empty.jsonl") + " --out " + path_of("empty_out.jsonl"));
  CHECK(filt.code == 0);
  CHECK(sofa::read_file(path_of("empty_out.jsonl")).empty());
}

TEST_CASE("leakage prints a machine-readable line") {
  auto closed = run_cli("leakage --M 2 --N 2 --w1 0 --w2 0 --n 1");
  CHECK(closed.code == 0);
  auto j = json::parse(closed.output);
  CHECK(j.at("closed_form").get<double>() == doctest::Approx(0.5));
  CHECK_FALSE(j.contains("monte_carlo"));

  auto mc = run_cli("leakage --M 4 --N 4 --w1 1 --w2 1 --n 3 --trials 20000 --seed 3");
  CHECK(mc.code == 0);
  auto jm = json::parse(mc.output);
  CHECK(jm.at("closed_form").get<double>() == doctest::Approx(0.875));
  CHECK(std::abs(jm.at("monte_carlo").get<double>() - 0.875) <=
        3 * jm.at("std_error").get<double>() + 1e-12);
  CHECK(jm.at("trials").get<std::uint64_t>() == 20000);
}

TEST_CASE("bench writes the documented CSV") {
  write("rules.acl", kAcl);
  auto bench = run_cli("bench --schemes naive,basic --rules " + path_of("rules.acl") +
                       " --packets 6 --repeat 2 --backend transparent --seed 4 --out " +
                       path_of("bench.csv") + " --rule-counts 2,4");
  CHECK(bench.code == 0);
  const std::string csv = sofa::read_file(path_of("bench.csv"));
  CHECK(csv.rfind("scheme,backend,kappa,rule_count,phase,repeats,items,min_ms,median_ms,"
                  "max_ms,ms_per_item,samp,encode,re_rand,add,neg,mul,is_zero\n",
                  0) == 0);
  // 2 schemes x 2 rule counts x 2 phases = 8 data rows.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  CHECK(csv.find("naive,transparent,33,2,obfuscate,2,2,") != std::string::npos);
  CHECK(csv.find("basic,transparent,33,4,filter,2,6,") != std::string::npos);
}
