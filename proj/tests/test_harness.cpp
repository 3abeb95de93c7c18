#include "descramble/harness/cli.hpp"
#include "descramble/harness/config.hpp"
#include "descramble/harness/report.hpp"
#include "descramble/harness/verification.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

using namespace descramble;
using namespace descramble::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "descramble_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "descramble");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config parsing and overrides") {
  const Config c = Config::parse(
      "top = 1\n[thm1]\nn_max = 100000 ; trailing comment\n# full line\nw = designed\nlist = 1, 2.5 ,3\n"
      "[flags]\non = yes\n");
  CHECK(c.get_int("top", 0) == 1);
  CHECK(c.get_int("thm1.n_max", 0) == 100000);
  CHECK(c.get_string("thm1.w", "") == "designed");
  CHECK(c.get_doubles("thm1.list", {}) == std::vector<double>{1, 2.5, 3});
  CHECK(c.get_bool("flags.on", false));
  CHECK(c.get_double("missing", 4.5) == 4.5);
  CHECK_THROWS_AS(c.get_int("thm1.w", 0), InvalidArgument);
  CHECK_THROWS_AS(Config::parse("[open\n"), FormatError);
  CHECK_THROWS_AS(Config::parse("novalue\n"), FormatError);

  Config o = c;
  o.apply_override("thm1.w=gaussian");
  CHECK(o.get_string("thm1.w", "") == "gaussian");
  CHECK_THROWS_AS(o.apply_override("nothing"), InvalidArgument);
  Config m;
  m.set("top", "9");
  o.merge(m);
  CHECK(o.get_int("top", 0) == 9);
}

TEST_CASE("tables, plots and slopes") {
  const fs::path dir = scratch("report");
  Table t{{"x", "y"}, {}};
  t.add({1.0, 1.0 / 3.0});
  t.add({2.0, 1e-300});
  write_table_csv(t, dir / "t.csv");
  const Table back = read_table_csv(dir / "t.csv");
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);
  CHECK(back.column("y")[0] == 1.0 / 3.0);
  CHECK_THROWS_AS(t.add({1.0}), InvalidArgument);

  write_line_svg({{"a", {1, 10, 100}, {1, 0.1, 0.01}}}, {"t", "x", "y", true, true}, dir / "l.svg");
  write_heatmap_svg(Matrix::Identity(3, 3), "h", dir / "h.svg");
  std::ifstream svg(dir / "l.svg");
  std::string first;
  std::getline(svg, first);
  CHECK(first.rfind("<svg", 0) == 0);

  CHECK(loglog_slope({1, 10, 100}, {1, 0.01, 1e-4}) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(loglog_slope({1}, {1}), InvalidArgument);
}

TEST_CASE("check roles") {
  CHECK(check_le("a", 1.0, 2.0).ok());
  CHECK_FALSE(check_le("a", 3.0, 2.0).ok());
  CHECK_FALSE(check_le("nan", std::nan(""), 2.0).ok());
  CHECK(check_le("control", 3.0, 2.0, CheckRole::kControl).ok());
  CHECK_FALSE(check_le("control", 1.0, 2.0, CheckRole::kControl).ok());
  CHECK(record("r", 5.0).ok());
  CHECK(check_in("i", 0.5, 0.0, 1.0).ok());
  CHECK_FALSE(check_in("i", 1.5, 0.0, 1.0).ok());
  VerificationResult r;
  r.add(check_gt("first", 2, 1));
  r.add(check_lt("second", 2, 1));
  CHECK_FALSE(r.ok());
  REQUIRE(r.find("sec") != nullptr);
  CHECK(r.find("sec")->threshold == 1);
}

TEST_CASE("run context") {
  Config cfg;
  cfg.set("a.n", "100000");
  RunContext full{cfg, "/tmp", false};
  RunContext quick{cfg, "/tmp", true};
  CHECK(full.samples("a.n", 5) == 100000);
  CHECK(quick.samples("a.n", 5) == 10000);
  CHECK(quick.epochs("a.e", 100) == 10);
  CHECK(quick.epochs("a.e", 3) == 1);
  CHECK(quick.mc_threshold("a.t", 0.05, 100000, 10000) == doctest::Approx(0.05 * std::sqrt(10.0)));
  CHECK(full.mc_threshold("a.t", 0.05, 100000, 100000) == 0.05);
  CHECK(full.seed("thm1") == quick.seed("thm1"));
  CHECK(full.seed("thm1") != full.seed("thm2"));
  cfg.set("seeds.thm1", "42");
  CHECK(RunContext{cfg, "/tmp", false}.seed("thm1") == 42);
}

TEST_CASE("verification registry") {
  std::set<std::string> names;
  for (const auto& v : verification_registry()) names.insert(v.name);
  for (const char* n : {"solvers", "thm1", "thm2", "cnn", "oda", "mds", "jacobian", "kernel", "splitting", "dln",
                        "deernet", "ilr"})
    CHECK(names.count(n) == 1);
  CHECK(find_verifier("nope") == nullptr);
}

TEST_CASE("command line") {
  const fs::path dir = scratch("cli");
  CHECK(run_cli({"verify", "mds", "--out", (dir / "v").string()}) == 0);
  CHECK(fs::exists(dir / "v" / "mds" / "checks.csv"));
  CHECK(fs::exists(dir / "v" / "summary.json"));
  CHECK(run_cli({"report", "--dir", (dir / "v").string()}) == 0);
  CHECK(run_cli({"verify", "no_such_thing", "--out", (dir / "x").string()}) == 2);
  CHECK(run_cli({"verify"}) == 2);
  CHECK(run_cli({"frobnicate"}) == 2);
  CHECK(run_cli({"verify", "kernel", "--set", "broken", "--out", (dir / "y").string()}) == 2);

  CHECK(run_cli({"gen", "--model", "deer", "--dim", "32", "--n", "200", "--snr", "10", "--out",
                 (dir / "data").string()}) == 0);
  CHECK(run_cli({"train", "--data", (dir / "data").string(), "--arch", "32,16,32", "--act", "tanh,sigmoid",
                 "--renorm", "--epochs", "3", "--out", (dir / "net").string()}) == 0);
  CHECK(run_cli({"train", "--data", (dir / "data").string(), "--arch", "31,16,32", "--act", "tanh,sigmoid",
                 "--out", (dir / "bad").string()}) == 2);
  CHECK(run_cli({"descramble", "--net", (dir / "net").string(), "--layer", "1", "--method", "closed", "--stencil",
                 "fourier", "--out", (dir / "rep").string()}) == 0);
  CHECK(fs::exists(dir / "rep" / "P.bin"));
  CHECK(fs::exists(dir / "rep" / "report.json"));
  CHECK(run_cli({"descramble", "--net", (dir / "net").string(), "--layer", "2", "--data", (dir / "data").string(),
                 "--method", "jacobian", "--stencil", "fd", "--out", (dir / "rep2").string()}) == 0);
  CHECK(run_cli({"descramble", "--net", (dir / "net").string(), "--layer", "5", "--out", (dir / "rep3").string()}) ==
        2);
  CHECK(run_cli({"svd-report", "--matrix", (dir / "rep" / "P.bin").string()}) == 0);
  CHECK(run_cli({"fourier-view", "--matrix", (dir / "rep" / "descrambled_W.bin").string(), "--out",
                 (dir / "fv").string()}) == 0);
  CHECK(fs::exists(dir / "fv" / "fourier_view.csv"));
  CHECK(run_cli({"svd-report", "--matrix", (dir / "missing.bin").string()}) == 2);
}
