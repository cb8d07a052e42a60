#include <cstdio>
#include <string>

#include "doctest.h"

#include "cascade/model_io.hpp"

using namespace cascade;

namespace {

const char* kTinyText = R"(# two driver states, two chain states, one control
name tiny
description smallest useful example
dims 2 2 1
bounds
0 1   # control may only push forward
C
-1  1
 1 -1
A0
0 0
0 0
A 0
-1 0
 1 0
A 1
-2 0
 2 0
B 0 0
-1 0
 1 0
B 0 1
-1 0
 1 0
)";

void check_same_model(const ZooEntry& a, const ZooEntry& b) {
  const auto& u = a.model;
  const auto& v = b.model;
  REQUIRE(u.r == v.r);
  REQUIRE(u.n == v.n);
  REQUIRE(u.p == v.p);
  CHECK((u.C - v.C).cwiseAbs().maxCoeff() == 0.0);
  CHECK((u.A0 - v.A0).cwiseAbs().maxCoeff() == 0.0);
  for (int z = 0; z < u.r; ++z)
    CHECK((u.A[z] - v.A[z]).cwiseAbs().maxCoeff() == 0.0);
  for (int j = 0; j < u.p; ++j)
    for (int z = 0; z < u.r; ++z)
      CHECK((u.B[j][z] - v.B[j][z]).cwiseAbs().maxCoeff() == 0.0);
  if (u.p > 0) {
    CHECK((u.lo - v.lo).cwiseAbs().maxCoeff() == 0.0);
    CHECK((u.hi - v.hi).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(a.name == b.name);
  CHECK(a.self_financing == b.self_financing);
  REQUIRE(a.V.has_value() == b.V.has_value());
  if (a.V) CHECK((*a.V - *b.V).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(a.cost.has_value() == b.cost.has_value());
  if (a.cost) {
    CHECK((a.cost->L - b.cost->L).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.cost->Phi - b.cost->Phi).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.cost->psi == b.cost->psi);
    CHECK(a.cost->alpha == b.cost->alpha);
  }
}

}  // namespace

TEST_CASE("comments, blank lines, and sections in any order") {
  const ZooEntry e = parse_model_file(kTinyText);
  CHECK(e.name == "tiny");
  CHECK(e.description == "smallest useful example");
  CHECK(e.model.r == 2);
  CHECK(e.model.n == 2);
  CHECK(e.model.A[1](1, 0) == 2.0);
  CHECK(e.model.lo[0] == 0.0);
  CHECK(e.model.hi[0] == 1.0);
  CHECK_FALSE(e.cost.has_value());
  CHECK_FALSE(e.self_financing);
}

TEST_CASE("every zoo entry survives an exact text round trip") {
  for (const auto& name : zoo_names()) {
    CAPTURE(name);
    const ZooEntry original = zoo_by_name(name);
    const std::string text = export_model_file(original);
    const ZooEntry back = parse_model_file(text);
    check_same_model(original, back);
    // A second export is byte-identical: the format is a fixed point.
    CHECK(export_model_file(back) == text);
  }
}

TEST_CASE("file save and load round trip") {
  const ZooEntry original = zoo_by_name("two-stock");
  const std::string path = "/tmp/cascade_io_roundtrip.model";
  save_model_file(original, path);
  const ZooEntry back = load_model_file(path);
  check_same_model(original, back);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_model_file("/no/such/dir/x.model"), ParseError);
  try {
    load_model_file("/no/such/dir/x.model");
  } catch (const ParseError& e) {
    CHECK(e.line == 0);
    CHECK(std::string(e.what()).find("line") == std::string::npos);
  }
}

TEST_CASE("missing sections are reported by name") {
  CHECK_THROWS_AS(parse_model_file(""), ParseError);
  CHECK_THROWS_AS(parse_model_file("# only a comment\n"), ParseError);
  CHECK_THROWS_WITH_AS(parse_model_file("C\n-1 1\n1 -1\n"),
                       "section 'C' before dims (line 1, column 1)", ParseError);

  std::string text = kTinyText;
  const auto cut = text.find("B 0 1");
  REQUIRE(cut != std::string::npos);
  text.erase(cut);
  CHECK_THROWS_WITH_AS(parse_model_file(text), "missing section B 0 1",
                       ParseError);

  CHECK_THROWS_WITH_AS(parse_model_file("dims 1 1 0\nA0\n0\nA 0\n0\n"),
                       "missing C section", ParseError);
}

TEST_CASE("bad numbers carry their position") {
  std::string text = kTinyText;
  const auto spot = text.find("-2 0");
  REQUIRE(spot != std::string::npos);
  text.replace(spot, 4, "-2 x");
  try {
    parse_model_file(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 17);
    CHECK(e.column == 4);
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
}

TEST_CASE("row shape mismatches are parse errors") {
  std::string text = kTinyText;
  const auto spot = text.find("-2 0");
  REQUIRE(spot != std::string::npos);
  text.replace(spot, 4, "-2 0 5");
  CHECK_THROWS_WITH_AS(parse_model_file(text),
                       "A 1: expected 2 numbers, got 3 (line 17, column 1)",
                       ParseError);
}

TEST_CASE("structural mistakes keep their own error types") {
  // Columns that do not balance parse fine but fail model validation, which
  // is a different error family than a parse error.
  std::string text = kTinyText;
  const auto spot = text.find("-2 0");
  REQUIRE(spot != std::string::npos);
  text.replace(spot, 4, "-3 0");
  CHECK_THROWS_AS(parse_model_file(text), GeneratorInvalid);

  std::string badC = kTinyText;
  const auto cspot = badC.find("-1  1");
  REQUIRE(cspot != std::string::npos);
  badC.replace(cspot, 5, "-1  9");
  CHECK_THROWS_AS(parse_model_file(badC), GeneratorInvalid);

  // Balanced columns but a combined rate that goes negative inside the box.
  std::string offbox = kTinyText;
  const auto bspot = offbox.find("B 0 1\n-1 0\n 1 0\n");
  REQUIRE(bspot != std::string::npos);
  offbox.replace(bspot, 16, "B 0 1\n5 0\n-5 0\n");
  CHECK_THROWS_AS(parse_model_file(offbox), NonAdmissibleModel);
}

TEST_CASE("section headers are validated") {
  CHECK_THROWS_WITH_AS(parse_model_file("dims 2 2\n"),
                       "dims needs: r n p (line 1, column 1)", ParseError);
  CHECK_THROWS_AS(parse_model_file("dims 0 2 1\n"), ParseError);
  CHECK_THROWS_AS(parse_model_file("dims 2 2 1\nA 7\n"), ParseError);
  CHECK_THROWS_AS(parse_model_file("dims 2 2 1\nB 0\n"), ParseError);
  CHECK_THROWS_AS(parse_model_file("dims 2 2 1\nB 1 0\n"), ParseError);
  CHECK_THROWS_AS(parse_model_file("dims 2 2 1\nwhatever\n"), ParseError);
  CHECK_THROWS_WITH_AS(parse_model_file("dims 2 2 1\nL\n0 0\n0 0\n"),
                       "L outside a cost block (line 2, column 1)", ParseError);
  CHECK_THROWS_AS(parse_model_file("dims 2 2 1\nflags frobnicate\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_model_file("dims 2 2 1\ncost\npsi cubic\n"),
                  ParseError);
}

TEST_CASE("cost blocks round trip including psi and discounting") {
  ZooEntry e = zoo_by_name("cats-dilemma");
  e.cost->psi = CostSpec::Psi::Quadratic;
  e.cost->alpha = 0.125;
  const ZooEntry back = parse_model_file(export_model_file(e));
  REQUIRE(back.cost.has_value());
  CHECK(back.cost->psi == CostSpec::Psi::Quadratic);
  CHECK(back.cost->alpha == 0.125);
}

TEST_CASE("costs without a text form refuse to export") {
  ZooEntry custom = zoo_by_name("cats-dilemma");
  custom.cost->psi = CostSpec::Psi::Custom;
  custom.cost->psi_fn = [](const Vector& u) { return u.squaredNorm(); };
  CHECK_THROWS_AS(export_model_file(custom), BadKind);

  ZooEntry timed = zoo_by_name("cats-dilemma");
  const Matrix L0 = timed.cost->L;
  timed.cost->L_t = [L0](double) { return L0; };
  CHECK_THROWS_AS(export_model_file(timed), BadKind);
}
