// Runs the gxlab binary named by GXLAB_CLI against small configs.

#include <catch2/catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gxlab/config.hpp"
#include "gxlab/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / ("gxlab_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const std::string& args) {
  const char* exe = std::getenv("GXLAB_CLI");
  REQUIRE(exe != nullptr);
  const fs::path out = scratch() / "stdout.txt";
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = std::string("\"") + exe + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

std::string args(const std::string& sub, const fs::path& cfg, const fs::path& out) {
  return sub + " --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"";
}

const char* kHeat = R"js({"gamma": {"sigma2_min": 0.25, "sigma2_max": 1.0}, "payoff": "x*x", "horizon": 1.0,
                       "grid": {"nx": 201}})js";

}  // namespace

TEST_CASE("heat writes a solution and a manifest", "[cli]") {
  const auto cfg = write_config("heat.json", kHeat);
  const auto out = scratch() / "heat";
  const auto r = run(args("heat", cfg, out));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const std::string csv = slurp(out / "u.csv");
  CHECK(csv.rfind("t,x,u\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') > 100);

  const auto manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["command"] == "heat");
  CHECK(manifest["tool_version"] == gxlab::io::kToolVersion);
  CHECK(manifest["seed"] == 0);
  REQUIRE(manifest["outputs"].size() == 1);
  CHECK(manifest["outputs"][0]["path"] == "u.csv");
  CHECK(manifest["outputs"][0]["sha256"] == gxlab::io::sha256_hex(csv));
  CHECK(manifest["config_hash"] == gxlab::config::config_hash(json::parse(kHeat)));
}

TEST_CASE("outputs are reproducible and the config hash is canonical", "[cli]") {
  const auto a = write_config("a.json", kHeat);
  const auto b = write_config("b.json", R"js({"horizon":1.0,"grid":{"nx":201},"payoff":"x*x",
      "gamma":{"sigma2_max":1.0,"sigma2_min":0.25}})js");
  REQUIRE(run(args("heat", a, scratch() / "ra")).code == 0);
  REQUIRE(run(args("heat", b, scratch() / "rb")).code == 0);
  CHECK(slurp(scratch() / "ra" / "u.csv") == slurp(scratch() / "rb" / "u.csv"));
  const auto ma = json::parse(slurp(scratch() / "ra" / "manifest.json"));
  const auto mb = json::parse(slurp(scratch() / "rb" / "manifest.json"));
  CHECK(ma["config_hash"] == mb["config_hash"]);
  CHECK(ma["outputs"] == mb["outputs"]);
}

TEST_CASE("config errors exit 2 and name the JSON path", "[cli]") {
  auto r = run(args("heat", write_config("degenerate.json", R"js({"gamma": {"sigma2_min": 0, "sigma2_max": 1},
                                                                  "payoff": "x"})js"),
                    scratch() / "e1"));
  CHECK(r.code == 2);
  CHECK(r.err.find("non-degeneracy") != std::string::npos);
  CHECK(r.err.find("/gamma") != std::string::npos);

  r = run(args("heat", write_config("badtype.json", R"js({"gamma": {"sigma2_min": "a", "sigma2_max": 1},
                                                       "payoff": "x"})js"),
               scratch() / "e2"));
  CHECK(r.code == 2);
  CHECK(r.err.find("/gamma/sigma2_min") != std::string::npos);

  r = run(args("heat", write_config("badexpr.json", R"js({"gamma": {"sigma2_min": 0.5, "sigma2_max": 1},
                                                       "payoff": "2**x"})js"),
               scratch() / "e3"));
  CHECK(r.code == 2);
  CHECK(r.err.find("/payoff") != std::string::npos);
  CHECK(r.err.find("SyntaxError") != std::string::npos);

  r = run(args("heat", write_config("notjson.json", "{ nope"), scratch() / "e4"));
  CHECK(r.code == 2);

  r = run(args("bsde", write_config("noterminal.json", R"js({"gamma": {"sigma2_min": 0.5, "sigma2_max": 1}})js"),
               scratch() / "e5"));
  CHECK(r.code == 2);
  CHECK(r.err.find("/terminal") != std::string::npos);
}

TEST_CASE("numeric errors exit 3", "[cli]") {
  const auto cfg = write_config("cfl.json", R"js({"gamma": {"sigma2_min": 0.25, "sigma2_max": 1.0}, "payoff": "x*x",
      "horizon": 1.0, "grid": {"x_min": -8, "x_max": 8, "nx": 161, "nt": 10}})js");
  const auto r = run(args("heat", cfg, scratch() / "cfl"));
  CHECK(r.code == 3);
  CHECK(r.err.find("CflViolation") != std::string::npos);
}

TEST_CASE("usage errors exit 64", "[cli]") {
  auto r = run("frobnicate");
  CHECK(r.code == 64);
  CHECK((r.out + r.err).find("Usage") != std::string::npos);
  r = run("");
  CHECK(r.code == 64);
  r = run("heat");  // --config is required
  CHECK(r.code == 64);
  r = run("heat --config /nonexistent/file.json");
  CHECK(r.code == 64);
}

TEST_CASE("bsde writes Y, Z and K", "[cli]") {
  const auto cfg = write_config("bsde.json", R"js({
      "gamma": {"sigma2_min": 0.25, "sigma2_max": 1.0},
      "generator": {"f": "-0.1*y", "g": "0"},
      "terminal": "x*x",
      "grid": {"nx": 129},
      "scenarios": [{"kind": "worst_case"}, {"id": "low", "kind": "piecewise", "values": [0.25]}]})js");
  const auto out = scratch() / "bsde";
  const auto r = run(args("bsde", cfg, out));
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(slurp(out / "bsde.csv").rfind("t,x,Y,Z\n", 0) == 0);
  const std::string k = slurp(out / "k_report.csv");
  CHECK(k.rfind("scenario_id,t,K\n", 0) == 0);
  CHECK(k.find("worst_case,") != std::string::npos);
  CHECK(k.find("low,") != std::string::npos);

  const auto bad = write_config("bsde_bad.json", R"js({
      "gamma": {"sigma2_min": 0.25, "sigma2_max": 1.0}, "terminal": "x",
      "scenarios": [{"kind": "piecewise", "values": [4.0]}]})js");
  CHECK(run(args("bsde", bad, scratch() / "bsde_bad")).code == 2);
}

TEST_CASE("repr summary", "[cli]") {
  const auto cfg = write_config("repr.json", R"js({
      "id": "coupled",
      "gamma": {"sigma2_min": 0.25, "sigma2_max": 1.0},
      "generator": {"f": "y+z", "g": "0.5*z"},
      "point": {"t": 0, "x": 0, "y": 0, "p": 1}})js");
  const auto out = scratch() / "repr";
  const auto r = run(args("repr", cfg, out));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto s = json::parse(slurp(out / "summary.json"));
  CHECK(s["rhs"] == 1.5);
  CHECK(s["abs_err"].get<double>() <= 0.03);
  CHECK(s.contains("fitted_limit"));
  CHECK(s.contains("decay_exponent"));
  CHECK(slurp(out / "slope.csv").rfind("eps,D_eps\n", 0) == 0);
}

TEST_CASE("props reports predicate verdicts", "[cli]") {
  const auto cfg = write_config("props.json", R"js({
      "gamma": {"sigma2_min": 0.25, "sigma2_max": 1.0},
      "generators": [{"f": "10*abs(z)", "g": "abs(z)"}, {"f": "abs(z)", "g": "2*abs(z)"}],
      "generator": {"f": "-abs(z)", "g": "0"},
      "predicates": ["translation", "subadd"]})js");
  const auto out = scratch() / "props";
  const auto r = run(args("props", cfg, out));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const std::string csv = slurp(out / "predicates.csv");
  CHECK(csv.rfind("predicate,point,value,verdict\n", 0) == 0);
  CHECK(csv.find("converse-gap,") != std::string::npos);
  const auto line = csv.substr(csv.find("converse-gap,"));
  CHECK(line.substr(0, line.find('\n')).ends_with(",holds"));
  CHECK(csv.find("translation,") != std::string::npos);
  const auto sub = csv.substr(csv.find("subadd,"));
  CHECK(sub.substr(0, sub.find('\n')).ends_with(",fails"));

  const auto bad = write_config("props_bad.json", R"js({"gamma": {"sigma2_min": 0.25, "sigma2_max": 1.0},
      "generator": {"f": "z"}, "predicates": ["associativity"]})js");
  const auto rb = run(args("props", bad, scratch() / "props_bad"));
  CHECK(rb.code == 2);
  CHECK(rb.err.find("/predicates/0") != std::string::npos);
}

TEST_CASE("oracle report", "[cli]") {
  const auto cfg = write_config("oracle.json", R"js({
      "gamma": {"sigma2_min": 0.25, "sigma2_max": 1.0},
      "payoffs": ["x*x", {"id": "abs", "expr": "abs(x)"}],
      "steps": 8})js");
  const auto out = scratch() / "oracle";
  const auto r = run(args("oracle", cfg, out));
  INFO(r.err);
  REQUIRE(r.code == 0);
  const std::string csv = slurp(out / "oracle_report.csv");
  CHECK(csv.rfind("payoff_id,oracle,pde,abs_diff,flagged\n", 0) == 0);
  CHECK(csv.find("\nabs,") != std::string::npos);

  const auto big = write_config("oracle_big.json", R"js({"gamma": {"sigma2_min": 0.25, "sigma2_max": 1.0},
      "payoffs": ["x"], "steps": 40})js");
  const auto rb = run(args("oracle", big, scratch() / "oracle_big"));
  CHECK(rb.code == 2);
  CHECK(rb.err.find("/steps") != std::string::npos);
}

TEST_CASE("acceptance with a tampered tolerance fails", "[cli][slow]") {
  const auto out = scratch() / "nested" / "missing" / "acceptance";
  const auto r = run("acceptance --tolerance-scale 1e-9 --out \"" + out.string() + "\"");
  CHECK(r.code == 1);
  CHECK(fs::exists(out / "acceptance.csv"));
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(r.out.find("[FAIL]") != std::string::npos);
}
