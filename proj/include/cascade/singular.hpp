#pragma once

#include <functional>

#include "cascade/ctmc.hpp"

namespace cascade {

// Stationary law of an irreducible generator: least-squares solve of X p = 0
// against e^T p = 1 through the normal equations. Throws Reducible when the
// transition graph is not strongly connected and SingularSolve when the
// residual survives above 1e-10.
ProbabilityVector steady_state(const Generator& X);

// Controlled chain of the food-allocation model at unit feed and spoil rates,
// averaged over the driver law c with one control value per driver state:
// X(u) = A0 + sum_z c[z] (A[z] + u[z] B[z]).
Generator cat_X(const Vector& c, const Vector& u);

// First three coordinates of the stationary law of cat_X in closed form; the
// last coordinate is always 1/2.
Vector cat_p(const Vector& c, const Vector& u);

// Squared distance of the stationary fed-state mass from the uniform target,
// eta(u) = |p(u) - (1/6)e|^2 = u^T H u / 2 + f^T u + k, with the affine map
// p(u) = (A u + b_aff) / 2 folded in.
struct QpProblem {
  Matrix H;  // positive semidefinite
  Vector f;
  double k = 0.0;
  Matrix A;  // eta(u) = |A u / 2 + b|^2
  Vector b;
  Vector lo, hi;
  Vector c;

  double eta(const Vector& u) const {
    return 0.5 * u.dot(H * u) + f.dot(u) + k;
  }
};

QpProblem build_qp(const Vector& c);

enum class QpClass { InteriorZero, BoundaryPositive };

const char* to_string(QpClass c);

struct QpSolution {
  Vector u0;          // minimum-norm minimizer
  double eta_star = 0.0;
  std::vector<int> active;  // coordinates of u0 sitting on a bound
  QpClass cls = QpClass::BoundaryPositive;
  bool max_iterations = false;
};

// Projected gradient to 1e-12 stationarity, then an exact minimum-norm
// tie-break over the optimal face (kernel directions of [H; g^T] intersected
// with the box, resolved by active-set enumeration).
QpSolution solve_box_qp(const QpProblem& qp);

// Brute-force box scan with inclusive endpoints; step must divide each side.
// Two tenfold refinements around the incumbent follow the coarse pass. Ties
// keep the lexicographically first point.
std::pair<Vector, double> qp_oracle_grid(const QpProblem& qp, double step);

// Forward state / backward costate sweep for the N-asset allocation chain
// under a prescribed open-loop control path u(t) (one value per driver
// state). H is the running Hamiltonian, sigma the switching terms dH/du.
struct SingularDiagnostics {
  std::vector<double> grid;
  std::vector<Vector> p, q;
  std::vector<double> H;
  std::vector<Vector> sigma;
};

SingularDiagnostics state_costate_integrate(
    const Vector& c, const std::function<Vector(double)>& u, double T,
    const ProbabilityVector& p0, const Vector& qT, double dt = 1e-3);

// Uncontrolled law started from the unfed state at unit rates: first the
// common fed-state mass 1/(2N) (1 - exp(-2t)), then the unfed mass
// (1 + exp(-2t)) / 2.
std::pair<double, double> singular_closed_form(int N, double t);

// Stationary law of A + u f e_j^T by the rank-one update formula through the
// pseudo-inverse of A; falls back to a direct solve when the formula residual
// is not small.
struct RankOneSteady {
  ProbabilityVector p;
  bool used_formula = true;
  double formula_residual = 0.0;
};

RankOneSteady rank_one_steady(const Generator& A, const Vector& f, int j,
                              double u);

}  // namespace cascade
