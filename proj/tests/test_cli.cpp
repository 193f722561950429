#include "doctest.h"
#include "pdhyp/cli.hpp"
#include "pdhyp/coords.hpp"
#include "pdhyp/dissipation.hpp"
#include "pdhyp/structure.hpp"
#include "pdhyp/trace.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace pdhyp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json load(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("pdhyp_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

// Small, fast simulation settings.
const char* kSmallSim = R"({"simulate": {"N": 32, "side": 62.83185307179586, "t_end": 4, "record_every": 0.5,
                             "fit_t_min": 0.5, "fit_t_max": 4}})";

}  // namespace

TEST_CASE("usage errors exit 2") {
  auto r = cli({"frobnicate"});
  CHECK(r.code == 2);
  CHECK(r.err.find("unknown subcommand 'frobnicate'") != std::string::npos);
  CHECK(r.err.find("Subcommands:") != std::string::npos);
  CHECK(cli({}).code == 2);
  CHECK(cli({"check", "--d", "two"}).code == 2);
  CHECK(cli({"check", "--no-such-flag"}).code == 2);
  r = cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("simulate") != std::string::npos);
}

TEST_CASE("FNV-1a 64 reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("config resolution fills defaults and rejects bad keys") {
  const auto d = resolve_config(nlohmann::json::object());
  CHECK(d == default_config());
  const auto c = resolve_config(nlohmann::json::parse(R"({"system": {"d": 3}, "seed": 7})"));
  CHECK(c["system"]["d"] == 3);
  CHECK(c["system"]["gamma"] == 2.0);
  CHECK(c["seed"] == 7);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::parse(R"({"sytem": {}})")), ConfigError);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::parse(R"({"check": {"radious": 0.1}})")), ConfigError);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::parse(R"({"check": {"analytic": 1}})")), ConfigError);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::parse(R"({"seed": -1})")), ConfigError);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::parse(R"({"simulate": {"NN": 32}})")), ConfigError);
  CHECK_THROWS_AS(system_from_config({{"name", "navier_stokes"}}), ConfigError);
}

TEST_CASE("check on damped Euler passes and its artifacts round-trip") {
  TempDir dir("check");
  const auto r = cli({"check", "--system", "damped_euler", "--d", "2", "--out", dir / "report.json",
                      "--compensator-out", dir / "k.json"});
  CHECK(r.code == 0);
  CHECK(r.out.find("all checks passed") != std::string::npos);
  const auto j = load(dir / "report.json");
  const StructureReport rep = structure_report_from_json(j);
  CHECK(rep.all_passed());
  CHECK(to_json(rep) == j);
  const auto kj = load(dir / "k.json");
  CHECK(to_json(compensator_from_json(kj)) == kj);
  const auto mj = load(dir / "report.manifest.json");
  const RunManifest m = run_manifest_from_json(mj);
  CHECK(to_json(m) == mj);
  CHECK(m.subcommand == "check");
  CHECK(m.config_hash.size() == 16);
  CHECK(m.outputs.size() == 2);
}

TEST_CASE("check without damping fails") {
  TempDir dir("undamped");
  const auto r = cli({"check", "--undamped", "--out", dir / "report.json"});
  CHECK(r.code == 1);
  const StructureReport rep = structure_report_from_json(load(dir / "report.json"));
  CHECK(rep.get("A1").status == Status::Fail);
}

TEST_CASE("coords verify writes a chart report") {
  TempDir dir("coords");
  const auto r = cli({"coords", "--verify", "--samples", "50", "--out", dir / "chart.json"});
  CHECK(r.code == 0);
  const auto j = load(dir / "chart.json");
  const ChartReport rep = chart_report_from_json(j);
  CHECK(rep.passed);
  CHECK(rep.samples == 50);
  CHECK(to_json(rep) == j);
  CHECK(cli({"coords", "--out", dir / "plain.json"}).code == 0);
  CHECK(load(dir / "plain.json").at("r") == 2);
}

TEST_CASE("lindecay writes the trace CSV and JSON") {
  TempDir dir("lin");
  const auto r = cli({"lindecay", "--p", "1", "--component", "D", "--time-samples", "12", "--out", dir / "l.csv"});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(dir / "l.csv");
  CHECK(csv.rfind("t,norm_C,norm_D,fit_slope_C,fit_slope_D\n", 0) == 0);
  const DecayTrace from_csv = decay_trace_from_csv(csv);
  const DecayTrace from_json = decay_trace_from_json(load(dir / "l.json"));
  CHECK(from_csv.t == from_json.t);
  CHECK(from_csv.columns == from_json.columns);
  CHECK(to_json(from_json) == load(dir / "l.json"));
  CHECK(to_csv(from_csv) == csv);
  CHECK(cli({"lindecay", "--component", "E", "--out", dir / "x.csv"}).code == 1);
}

TEST_CASE("simulate enforces the smallness guard") {
  TempDir dir("guard");
  spit(dir.path / "sim.json", kSmallSim);
  const auto r = cli({"simulate", "--config", dir / "sim.json", "--amplitude", "0.5", "--out-dir", dir / "run"});
  CHECK(r.code == 1);
  CHECK(r.err.find("amplitude outside chart domain") != std::string::npos);
  const auto e = nlohmann::json::parse(r.err);
  CHECK(e["error"]["type"] == "DomainError");
}

TEST_CASE("flags override config keys") {
  TempDir dir("override");
  spit(dir.path / "sim.json",
       R"({"simulate": {"N": 32, "side": 62.83185307179586, "t_end": 1, "record_every": 0.5,
                        "initial": {"amplitude": 0.5}}})");
  CHECK(cli({"simulate", "--config", dir / "sim.json", "--out-dir", dir / "a"}).code == 1);
  CHECK(cli({"simulate", "--config", dir / "sim.json", "--amplitude", "0.01", "--out-dir", dir / "b"}).code == 0);
  const auto j = load(dir / "b/trace.json");
  CHECK(j["config"]["simulate"]["initial"]["amplitude"] == 0.01);
  CHECK(j["config"]["simulate"]["N"] == 32);
  spit(dir.path / "bad.json", R"({"simulate": {"N": 32}, "extra": 1})");
  const auto r = cli({"simulate", "--config", dir / "bad.json"});
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"]["type"] == "ConfigError");
  CHECK(cli({"simulate", "--config", dir / "absent.json"}).code == 1);
}

TEST_CASE("simulate is deterministic per manifest hash") {
  TempDir dir("det");
  spit(dir.path / "sim.json", kSmallSim);
  REQUIRE(cli({"simulate", "--config", dir / "sim.json", "--out-dir", dir / "r1"}).code == 0);
  REQUIRE(cli({"simulate", "--config", dir / "sim.json", "--out-dir", dir / "r2"}).code == 0);
  REQUIRE(cli({"simulate", "--config", dir / "sim.json", "--amplitude", "0.02", "--out-dir", dir / "r3"}).code == 0);
  const auto m1 = run_manifest_from_json(load(dir / "r1/manifest.json"));
  const auto m2 = run_manifest_from_json(load(dir / "r2/manifest.json"));
  const auto m3 = run_manifest_from_json(load(dir / "r3/manifest.json"));
  CHECK(m1.config_hash == m2.config_hash);
  CHECK(m1.config_hash != m3.config_hash);
  CHECK(slurp(dir / "r1/trace.csv") == slurp(dir / "r2/trace.csv"));
  CHECK(slurp(dir / "r1/trace.csv") != slurp(dir / "r3/trace.csv"));
  const auto tj = load(dir / "r1/trace.json");
  const DecayTrace tr = decay_trace_from_json(tj["trace"]);
  CHECK(to_json(tr) == tj["trace"]);
  CHECK(tr.has_column("E_entropy"));
  CHECK(tr.has_column("v1_Lq"));
  CHECK(decay_trace_from_csv(slurp(dir / "r1/trace.csv")).columns == tr.columns);
}

TEST_CASE("report lists missing inputs and summarizes present ones") {
  TempDir dir("report");
  auto r = cli({"report", "--structure", dir / "s.json", "--compensator", dir / "k.json", "--linear", dir / "l.json",
                "--nonlinear", dir / "n.json"});
  CHECK(r.code == 1);
  for (const char* name : {"s.json", "k.json", "l.json", "n.json"}) CHECK(r.err.find(name) != std::string::npos);

  REQUIRE(cli({"check", "--out", dir / "s.json", "--compensator-out", dir / "k.json"}).code == 0);
  REQUIRE(cli({"lindecay", "--time-samples", "12", "--out", dir / "l.csv"}).code == 0);
  r = cli({"report", "--structure", dir / "s.json", "--compensator", dir / "k.json", "--linear", dir / "l.json",
           "--nonlinear", dir / "n.json"});
  CHECK(r.code == 1);
  CHECK(r.err.find("n.json") != std::string::npos);
  CHECK(r.err.find("s.json") == std::string::npos);

  spit(dir.path / "sim.json", kSmallSim);
  REQUIRE(cli({"simulate", "--config", dir / "sim.json", "--out-dir", dir / "run"}).code == 0);
  r = cli({"report", "--structure", dir / "s.json", "--compensator", dir / "k.json", "--linear", dir / "l.json",
           "--nonlinear", dir / "run/trace.json", "--out", dir / "summary.txt"});
  CHECK(r.code == 0);
  CHECK(r.out.find("predicted") != std::string::npos);
  CHECK(r.out.find("Compensator: damped_block") != std::string::npos);
  CHECK(slurp(dir / "summary.txt") == r.out);
}
