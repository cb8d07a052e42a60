#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "cascade/cli.hpp"
#include "cascade/simulate.hpp"

using namespace cascade;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = cli_run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

struct TempDir {
  fs::path path;
  TempDir() : path("/tmp/cascade_cli_tests") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("zoo listing and export") {
  const TempDir dir;
  const CliResult list = run({"zoo"});
  CHECK(list.code == 0);
  CHECK(list.out.find("bond-stock\n") != std::string::npos);
  CHECK(list.out.find("ring-benchmark\n") != std::string::npos);
  CHECK(count_lines(list.out) == 6);

  const std::string model_path = dir.file("cats.model");
  const CliResult exp = run({"zoo", "cats-dilemma", "-o", model_path});
  CHECK(exp.code == 0);
  CHECK(fs::exists(model_path));
  CHECK(read_file(model_path).find("dims 3 4 1") != std::string::npos);
}

TEST_CASE("classify prints the coupling class first") {
  const CliResult cats = run({"classify", "cats-dilemma"});
  CHECK(cats.code == 0);
  CHECK(cats.out.substr(0, 8) == "Cascade\n");
  CHECK(cats.out.find("diagonalizable: no") != std::string::npos);

  // All control blocks vanish at the box midpoint and the drift is shared, so
  // the two coordinates run independently.
  const CliResult inv = run({"classify", "invest-consume"});
  CHECK(inv.code == 0);
  CHECK(inv.out.substr(0, 10) == "Uncoupled\n");
  CHECK(inv.out.find("diagonalizable: yes") != std::string::npos);
}

TEST_CASE("solve writes the value surface, policy, and summary") {
  const TempDir dir;
  const std::string prefix = dir.file("cats");
  const CliResult r = run({"solve", "cats-dilemma", "--T", "1", "--dt", "0.01",
                           "-o", prefix, "--coupled-baseline"});
  CHECK(r.code == 0);
  CHECK(r.err.empty());
  CHECK(r.out.find("eta_star[0][0] = ") != std::string::npos);
  REQUIRE(fs::exists(prefix + ".k.csv"));
  REQUIRE(fs::exists(prefix + ".policy.csv"));
  REQUIRE(fs::exists(prefix + ".joint.csv"));
  REQUIRE(fs::exists(prefix + ".summary.json"));

  const json summary = json::parse(read_file(prefix + ".summary.json"));
  CHECK(summary["model"] == "cats-dilemma");
  CHECK(summary["r"] == 3);
  CHECK(summary["psi"] == "zero");
  CHECK(summary["identity_gap"].get<double>() < 1e-6);
  // Time left unfed does not depend on the driver or the control; from the
  // unfed state it is T/2 + (1 - exp(-2T)) / 4.
  const double expect = 0.5 + 0.25 * (1.0 - std::exp(-2.0));
  for (int z = 0; z < 3; ++z)
    CHECK(summary["eta_star"][z][3].get<double>() ==
          doctest::Approx(expect).epsilon(1e-6));

  const std::string header = read_file(prefix + ".k.csv").substr(0, 30);
  CHECK(header.substr(0, 12) == "t,k[0][0],k[");
}

TEST_CASE("output prefixes may point into directories that do not exist yet") {
  const TempDir dir;
  const std::string prefix = dir.file("fresh/nested/run");
  const CliResult r = run({"solve", "cats-dilemma", "--T", "0.2", "--dt",
                           "0.01", "-o", prefix});
  CHECK(r.code == 0);
  CHECK(fs::exists(prefix + ".summary.json"));
}

TEST_CASE("solve optional studies land in the summary") {
  const TempDir dir;
  const std::string prefix = dir.file("opt");
  const CliResult r =
      run({"solve", "cats-dilemma", "--T", "0.5", "--dt", "0.01", "-o", prefix,
           "--partial-feedback", "--diag-reduce", "weighted"});
  CHECK(r.code == 0);
  REQUIRE(fs::exists(prefix + ".pz.csv"));
  REQUIRE(fs::exists(prefix + ".partial_policy.csv"));
  REQUIRE(fs::exists(prefix + ".kvec.csv"));
  const json summary = json::parse(read_file(prefix + ".summary.json"));
  REQUIRE(summary.contains("partial_eta"));
  REQUIRE(summary.contains("diag_eta"));
  CHECK(summary["diag_mode"] == "weighted");
  CHECK(summary["c"].size() == 3);
  // The symmetric driver makes partial feedback as good as full feedback.
  for (int x = 0; x < 4; ++x) {
    double full = 0.0;
    for (int z = 0; z < 3; ++z)
      full += summary["eta_star"][z][x].get<double>() / 3.0;
    CHECK(summary["partial_eta"][x].get<double>() ==
          doctest::Approx(full).epsilon(1e-6));
  }
}

TEST_CASE("solve accepts the grid-scan penalty from the command line") {
  const TempDir dir;
  const std::string prefix = dir.file("cust");
  const CliResult r = run({"solve", "cats-dilemma", "--T", "0.2", "--dt",
                           "0.02", "-o", prefix, "--psi", "custom",
                           "--psi-grid", "9", "--alpha", "0.5"});
  CHECK(r.code == 0);
  const json summary = json::parse(read_file(prefix + ".summary.json"));
  CHECK(summary["psi"] == "custom");
  CHECK(summary["alpha"] == 0.5);
}

TEST_CASE("a solved policy feeds back into the simulator") {
  const TempDir dir;
  const std::string prefix = dir.file("pipe");
  REQUIRE(run({"solve", "cats-dilemma", "--T", "1", "--dt", "0.01", "-o",
               prefix}).code == 0);
  const CliResult sim =
      run({"simulate", "cats-dilemma", "--policy", prefix, "--T", "1",
           "--seed", "3", "--z0", "1", "--x0", "3", "-o", dir.file("run")});
  CHECK(sim.code == 0);
  const SamplePath path = parse_path(read_file(dir.file("run") + ".path.txt"));
  CHECK(path.z0 == 1);
  CHECK(path.x0 == 3);
  CHECK(path.T == 1.0);
}

TEST_CASE("multi-path simulation estimates the cost deterministically") {
  const TempDir dir;
  const auto args = [&](const std::string& prefix) {
    return std::vector<std::string>{
        "simulate", "cats-dilemma", "--paths", "40",   "--T",  "2",
        "--seed",   "11",           "--u",     "0.25", "--z0", "0",
        "--x0",     "3",            "-o",      dir.file(prefix)};
  };
  auto first = args("a");
  const CliResult a = run(first);
  CHECK(a.code == 0);
  auto second = args("b");
  second.push_back("--threads");
  second.push_back("3");
  const CliResult b = run(second);
  CHECK(b.code == 0);
  const json ja = json::parse(read_file(dir.file("a") + ".eta.json"));
  const json jb = json::parse(read_file(dir.file("b") + ".eta.json"));
  CHECK(ja["n_paths"] == 40);
  CHECK(ja["mean"] == jb["mean"]);
  CHECK(ja["std_error"].get<double>() > 0.0);
  // Unfed for about half the horizon under a mild tilt.
  CHECK(ja["mean"].get<double>() > 0.3);
  CHECK(ja["mean"].get<double>() < 2.0);
}

TEST_CASE("portfolio series from a single path") {
  const TempDir dir;
  const CliResult r =
      run({"simulate", "bond-stock", "--T", "5", "--seed", "2", "--portfolio",
           "-o", dir.file("pf")});
  CHECK(r.code == 0);
  const std::string csv = read_file(dir.file("pf") + ".portfolio.csv");
  CHECK(csv.substr(0, 8) == "t,v,s,w\n");
  CHECK(count_lines(csv) >= 2);
}

TEST_CASE("allocation program report") {
  const CliResult point = run({"qp", "--c", "1,0,0", "--grid-step", "0.05"});
  CHECK(point.code == 0);
  const json jp = json::parse(point.out);
  CHECK(jp["eta_star"].get<double>() == doctest::Approx(1.0 / 24).epsilon(1e-9));
  CHECK(jp["class"] == "BoundaryPositive");
  CHECK(jp["oracle_gap"].get<double>() < 1e-8);

  const CliResult split = run({"qp", "--c", "0,0.5,0.5", "--grid-step", "0.05"});
  CHECK(split.code == 0);
  const json js = json::parse(split.out);
  CHECK(js["class"] == "InteriorZero");
  CHECK(js["u_star"][1].get<double>() == doctest::Approx(1.0 / 6).epsilon(1e-6));
}

TEST_CASE("sweep covers the whole simplex grid") {
  const TempDir dir;
  const std::string out_path = dir.file("sweep.csv");
  const CliResult r =
      run({"sweep", "--resolution", "5", "--threads", "2", "-o", out_path});
  CHECK(r.code == 0);
  CHECK(r.out.find("(15 rows)") != std::string::npos);
  const std::string csv = read_file(out_path);
  CHECK(count_lines(csv) == 16);
  CHECK(csv.substr(0, 34) == "c1,c2,c3,u1,u2,u3,eta,class\n0,0,1,");
}

TEST_CASE("benchmark reports both solvers") {
  const TempDir dir;
  const std::string out_path = dir.file("bench.csv");
  const CliResult r = run({"benchmark", "--r-list", "2", "--n", "3", "--T",
                           "0.2", "--dt", "0.05", "-o", out_path});
  CHECK(r.code == 0);
  const std::string csv = read_file(out_path);
  CHECK(count_lines(csv) == 2);
  CHECK(csv.substr(0, 31) == "r,n,decoupled_ms,coupled_ms,rat");
  CHECK(r.out.find("2,3,") != std::string::npos);
}

TEST_CASE("usage problems exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"solve"}).code == 2);                       // missing model
  CHECK(run({"solve", "no-such-model"}).code == 2);      // not a file or name
  CHECK(run({"qp", "--c", "0.5,0.5"}).code == 2);        // wrong length
  CHECK(run({"qp", "--c", "1,0,0", "--grid-step", "0.3"}).code == 2);
  CHECK(run({"benchmark", "--r-list", "2.5"}).code == 2);
  CHECK(run({"sweep", "--resolution", "1"}).code == 2);
  CHECK(run({"simulate", "cats-dilemma", "--u", "0.1,0.2"}).code == 2);
  CHECK(run({"simulate", "bond-stock", "--paths", "2", "--portfolio"}).code == 2);

  const CliResult help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("solve") != std::string::npos);
}

TEST_CASE("model problems exit with 3") {
  const TempDir dir;
  // No valuation table: the portfolio series is undefined.
  CHECK(run({"simulate", "cats-dilemma", "--portfolio",
             "-o", dir.file("x")}).code == 3);

  const std::string bad = dir.file("bad.model");
  {
    std::ofstream f(bad);
    f << "dims 1 2 0\nC\n0\nA0\n-1 0\n0.5 0\nA 0\n0 0\n0 0\n";
  }
  const CliResult r = run({"solve", bad});
  CHECK(r.code == 3);
  CHECK(r.err.find("error:") != std::string::npos);

  const std::string missing = dir.file("missing.model");
  {
    std::ofstream f(missing);
    f << "dims 1 2 1\nbounds\n0 1\nC\n0\nA0\n0 0\n0 0\nA 0\n0 0\n0 0\n";
  }
  CHECK(run({"solve", missing}).code == 2);  // no B section: a parse error
}
