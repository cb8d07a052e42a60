#include <cmath>

#include "doctest.h"

#include "cascade/model.hpp"
#include "cascade/zoo.hpp"

using namespace cascade;

namespace {

// Two driver states, two chain states, one control; admissible on [0, 1].
CascadeModel tiny_model() {
  CascadeModel m;
  m.r = 2;
  m.n = 2;
  m.p = 1;
  m.C = Matrix(2, 2);
  m.C << -1.0, 1.0, 1.0, -1.0;
  Matrix a(2, 2);
  a << -1.0, 0.0, 1.0, 0.0;
  m.A0 = Matrix::Zero(2, 2);
  m.A = {a, 2.0 * a};
  Matrix b(2, 2);
  b << -1.0, 0.0, 1.0, 0.0;
  m.B = {{b, b}};
  m.lo = Vector::Constant(1, 0.0);
  m.hi = Vector::Constant(1, 1.0);
  return m;
}

}  // namespace

TEST_CASE("validate_model flags structural problems") {
  CHECK_NOTHROW(validate_model(tiny_model()));

  auto bad = tiny_model();
  bad.A.pop_back();
  CHECK_THROWS_AS(validate_model(bad), DimensionMismatch);

  bad = tiny_model();
  std::swap(bad.lo, bad.hi);
  CHECK_THROWS_AS(validate_model(bad), BoxViolation);

  bad = tiny_model();
  bad.B[0][1](1, 0) = 2.0;  // column sum breaks
  CHECK_THROWS_AS(validate_model(bad), NonAdmissibleModel);

  bad = tiny_model();
  bad.lo[0] = -2.0;  // u = -2 makes rate (1, 0) negative
  CHECK_THROWS_AS(validate_model(bad), NonAdmissibleModel);
}

TEST_CASE("check_admissible reports the offending vertex") {
  auto m = tiny_model();
  m.lo[0] = -2.0;
  const auto report = check_admissible(m);
  CHECK(!report.ok);
  CHECK(report.detail.find("z = ") != std::string::npos);
  CHECK(report.detail.find("vertex") != std::string::npos);
  CHECK(check_admissible(tiny_model()).ok);
}

TEST_CASE("box_vertices counts in binary with coordinate 0 fastest") {
  Vector lo(2), hi(2);
  lo << 0.0, 10.0;
  hi << 1.0, 11.0;
  const auto v = box_vertices(lo, hi);
  REQUIRE(v.size() == 4);
  CHECK(v[0][0] == 0.0); CHECK(v[0][1] == 10.0);
  CHECK(v[1][0] == 1.0); CHECK(v[1][1] == 10.0);
  CHECK(v[2][0] == 0.0); CHECK(v[2][1] == 11.0);
  CHECK(v[3][0] == 1.0); CHECK(v[3][1] == 11.0);
}

TEST_CASE("assemble_generator respects bounds and indices") {
  const auto m = tiny_model();
  const Matrix P = assemble_generator(m, 1, Vector::Constant(1, 1.0));
  CHECK(P(1, 0) == doctest::Approx(3.0));  // 2 * a + 1 * b
  CHECK_THROWS_AS(assemble_generator(m, 2, Vector::Constant(1, 0.0)),
                  IndexOutOfRange);
  CHECK_THROWS_AS(assemble_generator(m, 0, Vector::Constant(1, 1.5)),
                  ControlOutOfBounds);
  CHECK_THROWS_AS(assemble_generator(m, 0, Vector::Zero(2)),
                  DimensionMismatch);
}

TEST_CASE("tabulated policies are left-closed on their grid") {
  Policy pol;
  pol.kind = Policy::Kind::Tabulated;
  pol.grid = {0.0, 1.0};
  pol.table = {{Matrix::Constant(2, 2, 0.25)}, {Matrix::Constant(2, 2, 0.75)}};

  CHECK(policy_eval(pol, 0.0, 0, 0)[0] == 0.25);
  CHECK(policy_eval(pol, 0.999, 1, 1)[0] == 0.25);
  CHECK(policy_eval(pol, 1.0, 0, 0)[0] == 0.75);
  CHECK(policy_eval(pol, 7.0, 0, 0)[0] == 0.75);   // last slab extends
  CHECK(policy_eval(pol, -0.5, 0, 0)[0] == 0.25);  // clamped to the front

  Policy empty;
  empty.kind = Policy::Kind::Tabulated;
  CHECK_THROWS_AS(policy_eval(empty, 0.0, 0, 0), EmptyInput);
}

TEST_CASE("policy_eval_clamped pulls controls into the box and counts") {
  const auto pol = constant_policy(Vector::Constant(1, 2.0));
  Vector lo = Vector::Constant(1, 0.0), hi = Vector::Constant(1, 1.0);
  long long violations = 0;
  const Vector u = policy_eval_clamped(pol, 0.0, 0, 0, lo, hi, &violations);
  CHECK(u[0] == 1.0);
  CHECK(violations == 1);

  violations = 0;
  policy_eval_clamped(constant_policy(Vector::Constant(1, 0.5)), 0.0, 0, 0, lo,
                      hi, &violations);
  CHECK(violations == 0);

  CHECK_THROWS_AS(
      policy_eval_clamped(constant_policy(Vector::Zero(2)), 0.0, 0, 0, lo, hi,
                          nullptr),
      DimensionMismatch);
}

TEST_CASE("lift_to_joint glues the driver part to per-state x-parts") {
  const auto m = tiny_model();
  const auto pol = constant_policy(Vector::Constant(1, 0.5));
  const Generator joint = lift_to_joint(m, pol, 0.0);
  REQUIRE(joint.dim() == 4);
  // Driver block: rate C(z', z) on (z' * n + x, z * n + x).
  CHECK(joint.m(2, 0) == doctest::Approx(m.C(1, 0)));
  CHECK(joint.m(3, 1) == doctest::Approx(m.C(1, 0)));
  // x-part within the z = 1 block at u = 0.5.
  const Matrix P1 = assemble_generator(m, 1, Vector::Constant(1, 0.5));
  CHECK(joint.m(3, 2) == doctest::Approx(P1(1, 0)));
  // Diagonal balances everything.
  CHECK(joint.m.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("triangular_form accepts single-column models only") {
  const auto cat = cats_dilemma();
  const auto form = triangular_form(cat.model);
  REQUIRE(form.valid);
  CHECK(form.column == 3);
  REQUIRE(form.a_col.size() == 3);
  CHECK(form.a_col[0][1] == doctest::Approx(0.5));
  CHECK(form.b_col[0][0][1] == doctest::Approx(1.0));

  const auto bs = bond_stock_sf();
  CHECK(!triangular_form(bs.model).valid);
}

TEST_CASE("diagonalizable_sufficient distinguishes the two conditions") {
  auto m = tiny_model();
  m.A[1] = m.A[0];
  CHECK(diagonalizable_sufficient(m, false) == DiagSufficiency::HoldsByC1);
  // Feedback reading z with a nonzero B only satisfies the second condition
  // when B vanishes.
  CHECK(diagonalizable_sufficient(m, true) == DiagSufficiency::Unknown);
  m.B[0][0].setZero();
  m.B[0][1].setZero();
  CHECK(diagonalizable_sufficient(m, true) == DiagSufficiency::HoldsByC2);

  const auto invest = invest_consume();
  CHECK(diagonalizable_sufficient(invest.model, false) ==
        DiagSufficiency::HoldsByC1);
  CHECK(diagonalizable_sufficient(invest.model, true) ==
        DiagSufficiency::Unknown);

  const auto cat = cats_dilemma();
  CHECK(diagonalizable_sufficient(cat.model, false) == DiagSufficiency::Unknown);
}

TEST_CASE("cost evaluation handles discounting and time-varying L") {
  CostSpec cost = zero_cost(2, 2);
  cost.L = Matrix::Constant(2, 2, 3.0);
  cost.Phi = Matrix::Constant(2, 2, 5.0);
  cost.alpha = 0.5;
  CHECK(cost.running(2.0)(0, 0) == doctest::Approx(3.0 * std::exp(-1.0)));
  CHECK(cost.terminal(2.0)(1, 1) == doctest::Approx(5.0 * std::exp(-1.0)));

  cost.L_t = [](double t) { return Matrix::Constant(2, 2, t); };
  cost.alpha = 0.0;
  CHECK(cost.running(0.25)(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("minimize_control_term: boundary picks for a linear penalty") {
  CostSpec cost = zero_cost(1, 1);
  Vector lo(2), hi(2);
  lo << -1.0, -1.0;
  hi << 2.0, 2.0;
  Vector s(2);
  s << 3.0, -1.0;
  const auto cm = minimize_control_term(s, cost, lo, hi);
  CHECK(cm.u[0] == -1.0);  // positive slope: low end
  CHECK(cm.u[1] == 2.0);   // negative slope: high end
  CHECK(cm.value == doctest::Approx(-3.0 - 2.0));

  s << 0.0, 1.0;
  CHECK(minimize_control_term(s, cost, lo, hi).u[0] ==
        doctest::Approx(0.5));  // midpoint on a vanishing switching term
}

TEST_CASE("minimize_control_term: clamped stationary point for quadratic") {
  CostSpec cost = zero_cost(1, 1);
  cost.psi = CostSpec::Psi::Quadratic;
  Vector lo = Vector::Constant(1, -1.0), hi = Vector::Constant(1, 1.0);

  Vector s = Vector::Constant(1, 1.0);  // interior: u = -1/2
  auto cm = minimize_control_term(s, cost, lo, hi);
  CHECK(cm.u[0] == doctest::Approx(-0.5));
  CHECK(cm.value == doctest::Approx(-0.25));

  s[0] = 5.0;  // stationary point -2.5 clamps to -1
  cm = minimize_control_term(s, cost, lo, hi);
  CHECK(cm.u[0] == -1.0);
  CHECK(cm.value == doctest::Approx(-5.0 + 1.0));
}

TEST_CASE("minimize_control_term: custom grid scan") {
  CostSpec cost = zero_cost(1, 1);
  cost.psi = CostSpec::Psi::Custom;
  cost.psi_fn = [](const Vector& u) { return u.squaredNorm(); };
  cost.custom_grid_points = 101;
  Vector lo = Vector::Constant(1, -1.0), hi = Vector::Constant(1, 1.0);

  Vector s = Vector::Constant(1, 1.0);
  const auto cm = minimize_control_term(s, cost, lo, hi);
  CHECK(cm.u[0] == doctest::Approx(-0.5).epsilon(0.02));
  CHECK(cm.value == doctest::Approx(-0.25).epsilon(0.02));

  // Three controls exceed the scan budget.
  CostSpec wide = cost;
  Vector lo3 = Vector::Constant(3, 0.0), hi3 = Vector::Constant(3, 1.0);
  CHECK_THROWS_AS(minimize_control_term(Vector::Zero(3), wide, lo3, hi3),
                  CustomPsiDimension);

  CostSpec broken = cost;
  broken.psi_fn = nullptr;
  CHECK_THROWS_AS(minimize_control_term(s, broken, lo, hi), BadKind);
}
