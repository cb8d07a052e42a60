#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cascade/ctmc.hpp"

namespace cascade {

// Controlled chain x on n states driven by an autonomous chain z on r states.
// For fixed (z, u) the x-generator is
//
//   P(z, u) = A0 + A[z] + sum_j u[j] * B[j][z]
//
// with u confined to the box [lo, hi]. A0 + A[z] must be a generator for every
// z, each B[j][z] has zero column sums, and P(z, u) must stay a generator at
// every vertex of the box (affinity in u then covers the interior).
struct CascadeModel {
  int r = 0;
  int n = 0;
  int p = 0;
  Matrix C;                          // r x r, driver generator
  Matrix A0;                         // n x n
  std::vector<Matrix> A;             // r entries, n x n
  std::vector<std::vector<Matrix>> B;  // B[j][z], p x r entries, n x n
  Vector lo, hi;                     // p entries each

  Vector box_midpoint() const { return 0.5 * (lo + hi); }
};

// Structural validation: dimensions, box ordering, and generator conditions.
// Throws DimensionMismatch / BoxViolation / NonAdmissibleModel.
void validate_model(const CascadeModel& model);

struct AdmissibilityReport {
  bool ok = true;
  std::string detail;  // empty when ok
};

// Non-throwing variant of the generator checks; reports the first offending
// (z, box vertex, entry).
AdmissibilityReport check_admissible(const CascadeModel& model);

// P(z, u) as a plain matrix. Throws IndexOutOfRange / ControlOutOfBounds.
Matrix assemble_generator(const CascadeModel& model, int z, const Vector& u);

// Enumerate box vertices in binary-counter order (coordinate 0 fastest).
std::vector<Vector> box_vertices(const Vector& lo, const Vector& hi);

// Feedback control u(t, z, x). Constant and Tabulated kinds are enough for
// the solvers and CLI; ClosedForm admits arbitrary callbacks.
struct Policy {
  enum class Kind { Constant, Tabulated, ClosedForm };
  Kind kind = Kind::Constant;

  Vector constant;  // Constant

  // Tabulated: piecewise-constant on [grid[k], grid[k+1]) with the last
  // segment extending to any t >= grid.back(). table[k][j] is n x r holding
  // u_j at (x = row, z = column).
  std::vector<double> grid;
  std::vector<std::vector<Matrix>> table;

  std::function<Vector(double, int, int)> closed_form;  // (t, z, x) -> u
};

Policy constant_policy(Vector u);
Policy closed_form_policy(std::function<Vector(double, int, int)> fn);

// Raw policy value; no clamping.
Vector policy_eval(const Policy& policy, double t, int z, int x);

// Policy value clamped to the box; increments *violations when any coordinate
// had to be moved by more than 1e-12.
Vector policy_eval_clamped(const Policy& policy, double t, int z, int x,
                           const Vector& lo, const Vector& hi,
                           long long* violations);

// Joint generator on r * n states (s = z * n + x) induced by the model and a
// policy frozen at time t.
Generator lift_to_joint(const CascadeModel& model, const Policy& policy,
                        double t);

// Column-indexed form of the model data: a_col[z] = A[z] restricted to its
// only nonzero column, etc. Valid when every A[z] and B[j][z] touches a single
// shared column; several closed-form reductions need this shape.
struct TriangularForm {
  bool valid = false;
  int column = -1;  // the common column, -1 when valid and all parts are zero
  std::vector<Vector> a_col;                 // r entries
  std::vector<std::vector<Vector>> b_col;    // [j][z]
};

TriangularForm triangular_form(const CascadeModel& model);

// Sufficient conditions for the optimally controlled joint chain to factor
// into independent z and x chains:
//   HoldsByC1: A[z] and every B[j][z] identical across z, and the feedback
//              does not read z.
//   HoldsByC2: A[z] identical across z and, when feedback reads z, every
//              B[j][z] is zero (otherwise B z-independent suffices).
enum class DiagSufficiency { HoldsByC1, HoldsByC2, Unknown };

const char* to_string(DiagSufficiency s);

DiagSufficiency diagonalizable_sufficient(const CascadeModel& model,
                                          bool feedback_on_z);

// ---- cost specification ----

// Stage cost at (z, x) is L(x, z) plus the control penalty psi(u); terminal
// cost is Phi(x, z). A positive alpha discounts L and Phi by exp(-alpha t);
// psi is never discounted. L_t, when set, replaces the constant L.
struct CostSpec {
  Matrix L;    // n x r
  Matrix Phi;  // n x r
  std::function<Matrix(double)> L_t;

  enum class Psi { Zero, Quadratic, Custom };
  Psi psi = Psi::Zero;
  std::function<double(const Vector&)> psi_fn;  // Custom only
  int custom_grid_points = 101;                 // per axis, Custom only

  double alpha = 0.0;

  Matrix running(double t) const;
  Matrix terminal(double T) const;
  double psi_value(const Vector& u) const;
};

CostSpec zero_cost(int r, int n);

// min over the box of sum_j u[j] * s[j] + psi(u). Zero psi picks a bound per
// coordinate by the sign of s (midpoint on a zero switching term); Quadratic
// clamps the stationary point -s/2 and re-evaluates the clamped value exactly;
// Custom scans an inclusive uniform grid (lexicographic first on ties) and is
// limited to p <= 2.
struct ControlMin {
  double value = 0.0;
  Vector u;
};

ControlMin minimize_control_term(const Vector& s, const CostSpec& cost,
                                 const Vector& lo, const Vector& hi);

// Value of the minimum only, with no allocation for Zero and Quadratic psi.
// Solver inner loops call this per state; keep it in sync with the term above.
double minimize_control_value(const Vector& s, const CostSpec& cost,
                              const Vector& lo, const Vector& hi);

}  // namespace cascade
