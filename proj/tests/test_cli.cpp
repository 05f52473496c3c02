#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cconv/cli.hpp"
#include "cconv/errors.hpp"
#include "cconv/grid.hpp"

using namespace cconv;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cconv_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

const char* kSmall =
    "budgets.constants = 300\n"
    "budgets.mtw = 300\n"
    "budgets.mtw_refine = 10\n"
    "budgets.loeper = 500\n"
    "budgets.qqconv = 300\n"
    "budgets.chord_probe = 20\n";

}  // namespace

TEST_CASE("config parsing") {
  RunConfig d = RunConfig::defaults();
  CHECK(d.get("cost.name") == "power");
  CHECK(d.numbers("domain.x.lo").size() == 2);
  CHECK(d.numbers("domain.y.lo")[0] == doctest::Approx(1.1));

  try {
    RunConfig::parse("cost.nmae = power\n");
    FAIL("unknown key accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    CHECK(std::string(e.what()).find("cost.nmae") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::parse("seed = 1\nseed = 2\n"), Error);
  CHECK_THROWS_AS(RunConfig::parse("just words\n"), Error);
  CHECK_THROWS_AS(RunConfig::parse("domain.x.lo = 0,0,0\n"), Error);
  CHECK_THROWS_AS(RunConfig::parse("budgets.mtw = 0\n"), Error);
  CHECK_THROWS_AS(RunConfig::parse("phi.source = csv\n"), Error);

  RunConfig c = RunConfig::parse("# comment\ncost.name = sqrt   # trailing\n\ndomain.dim = 1\n");
  CHECK(c.get("cost.name") == "sqrt");
  CHECK(c.numbers("domain.y.hi").size() == 1);
  // The echo is itself a config that resolves to the same values.
  CHECK(RunConfig::parse(c.echo()).values() == c.values());
}

TEST_CASE("defaulted config is valid for every built-in cost") {
  for (const char* name : {"quadratic", "bilinear", "power", "log", "sqrt"}) {
    RunConfig c = RunConfig::parse(std::string(kSmall) + "cost.name = " + name + "\n");
    CAPTURE(name);
    CHECK_NOTHROW(run("constants", c));
  }
}

TEST_CASE("analyze on the quadratic cost") {
  RunConfig c = RunConfig::parse(std::string(kSmall) + "cost.name = quadratic\n");
  RunOutcome r = run("analyze", c);
  CHECK(r.exit_status == 0);
  CHECK(r.report["mtw"]["verdict"] == "nonneg");
  CHECK(r.report["loeper"]["certificate"].is_null());
  CHECK(r.report["qqconv"]["C"].get<double>() <= 1.0 + 1e-6);
  CHECK(r.report["schema_version"] == 1);
  const std::string summary = serialize_summary(r.report);
  for (const char* line : {"mtw: nonneg", "loeper: none found", "qqconv: C", "chord probe:", "constants:"}) {
    CHECK(summary.find(line) != std::string::npos);
  }
}

TEST_CASE("analyze on the power cost finds a certificate") {
  RunConfig c = RunConfig::parse(kSmall);
  c.set("budgets.loeper", "2000");
  RunOutcome r = run("analyze", c);
  REQUIRE(r.report["loeper"]["certificate"].is_object());
  CHECK(r.report["loeper"]["certificate"]["margin"].get<double>() > 1e-6);
  CHECK(r.report["mtw"]["verdict"] == "violated");
  bool csv = false;
  for (const auto& [name, body] : r.artifacts) csv = csv || name == "loeper_certificate.csv";
  CHECK(csv);
}

TEST_CASE("counterexample on the quadratic cost exits 2") {
  RunConfig c = RunConfig::parse("cost.name = quadratic\nbudgets.loeper = 1000\n");
  RunOutcome r = run("counterexample", c);
  CHECK(r.exit_status == 2);
  CHECK(r.report["counterexample"]["status"] == "NoViolationFound");
  CHECK(r.report["counterexample"]["message"].get<std::string>().find("NoViolationFound") != std::string::npos);

  const fs::path dir = scratch("quad_cx");
  c.set("output_dir", dir.string());
  std::ostringstream out, err;
  CHECK(run_to_directory("counterexample", c, out, err) == 2);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(out.str().find("counterexample: verdict false") != std::string::npos);
}

TEST_CASE("chord command on the worked quadratic example") {
  RunConfig c = RunConfig::parse(
      "cost.name = quadratic\n"
      "domain.y.lo = -1,-1\n"
      "domain.y.hi = 2,2\n"
      "grid.x_count = 33\n");
  RunOutcome r = run("chord", c);
  CHECK(r.report["chord"]["probe_value"].get<double>() == doctest::Approx(0.125).epsilon(1e-4));
  CHECK(r.report["chord"]["connect"]["segment_identity"].get<double>() <= 1e-4);
  REQUIRE(r.artifacts.size() == 1);
  std::istringstream is(r.artifacts[0].second);
  GridFunction g = read_grid_csv(is);
  // Node (0.5, 0) of the 33^2 lattice.
  const int k = g.lattice.flat_index({16, 0});
  CHECK(g.lattice.node(k)[0] == doctest::Approx(0.5));
  CHECK(g.values[size_t(k)] == doctest::Approx(0.125).epsilon(1e-4));
}

TEST_CASE("envelope and convexity commands") {
  RunConfig c = RunConfig::parse("cost.name = quadratic\ngrid.x_count = 16\nphi.amplitude = -1\nbudgets.alt_pairs = 3\n");
  RunOutcome e = run("envelope", c);
  CHECK(e.report["envelope"]["max_gap"].get<double>() >= 0.0);
  CHECK(e.artifacts.size() == 2);
  RunOutcome k = run("check-convexity", c);
  CHECK(k.report.contains("c_convexity"));
  CHECK(k.report["alternative_c_convexity"]["triples"].get<long>() > 0);
  // For a Loeper cost the two notions agree.
  CHECK(k.report["c_convexity"]["holds"] == k.report["alternative_c_convexity"]["holds"]);
}

TEST_CASE("canonical json") {
  json j = {{"b", 0.1}, {"a", {1, 2.5, nullptr}}, {"c", {{"z", true}, {"y", "s\"q"}}}, {"n", -3}};
  const std::string s = serialize_json(j);
  CHECK(s == "{\"a\":[1,2.5,null],\"b\":0.10000000000000001,\"c\":{\"y\":\"s\\\"q\",\"z\":true},\"n\":-3}\n");
  CHECK(json::parse(s) == j);
  json bad = {{"x", std::numeric_limits<double>::infinity()}};
  CHECK(serialize_json(bad) == "{\"x\":null}\n");

  RunConfig c = RunConfig::parse(std::string(kSmall) + "cost.name = sqrt\n");
  RunOutcome r = run("analyze", c);
  CHECK(json::parse(serialize_json(r.report)) == r.report);
}

TEST_CASE("repeated runs are byte-identical") {
  RunConfig c = RunConfig::parse(std::string(kSmall) + "seed = 11\n");
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  std::ostringstream out, err;
  c.set("output_dir", a.string());
  REQUIRE(run_to_directory("analyze", c, out, err) == 0);
  c.set("output_dir", b.string());
  REQUIRE(run_to_directory("analyze", c, out, err) == 0);
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
  CHECK(slurp(a / "summary.txt") == slurp(b / "summary.txt"));
  CHECK(slurp(a / "loeper_certificate.csv") == slurp(b / "loeper_certificate.csv"));
  for (const auto& entry : fs::directory_iterator(a)) CHECK(entry.path().extension() != ".tmp");

  c.set("seed", "12");
  c.set("output_dir", b.string());
  REQUIRE(run_to_directory("analyze", c, out, err) == 0);
  CHECK(slurp(a / "report.json") != slurp(b / "report.json"));
}

TEST_CASE("errors name the stage and exit 1") {
  RunConfig c = RunConfig::parse("cost.name = log\ndomain.y.lo = 0.5,0.5\ndomain.y.hi = 1.5,1.5\n");
  std::ostringstream out, err;
  c.set("output_dir", scratch("err").string());
  CHECK(run_to_directory("constants", c, out, err) == 1);
  CHECK(err.str().find("error in stage config") != std::string::npos);

  RunConfig bad = RunConfig::parse("cost.name = cubic\n");
  std::ostringstream err2;
  CHECK(run_to_directory("constants", bad, out, err2) == 1);
  CHECK(err2.str().find("cost.name") != std::string::npos);
  CHECK_THROWS_AS(run("frobnicate", bad), Error);
}
