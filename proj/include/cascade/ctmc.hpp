#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "cascade/errors.hpp"

namespace cascade {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Throughout the library a generator acts on column distributions: dp/dt = P p,
// columns sum to zero, off-diagonal entries are nonnegative.
inline constexpr double kGeneratorTol = 1e-12;
inline constexpr double kProbabilityTol = 1e-9;

// Single transition source -> target at unit rate: +1 at (target, source),
// -1 at (source, source).
struct JumpMatrix {
  int source = 0;
  int target = 0;
  int dim = 0;

  Matrix dense() const;
};

JumpMatrix jump_matrix(int source, int target, int dim);

// Validated generator matrix. `label` shows up in error messages so a caller
// can report which matrix (and which column) failed.
struct Generator {
  Matrix m;

  int dim() const { return static_cast<int>(m.rows()); }
};

void validate_generator(const Matrix& m, double tol = kGeneratorTol,
                        const std::string& label = "generator");
Generator make_generator(Matrix m, double tol = kGeneratorTol,
                         const std::string& label = "generator");

// Sums rate-weighted jump matrices; duplicate (source, target) pairs merge by
// adding rates.
Generator generator_from_jumps(
    const std::vector<std::pair<JumpMatrix, double>>& jumps, int dim);

// Distribution over states. The factory clamps entries within `entry_tol` of
// [0, 1] onto the interval and rejects anything further out, and requires the
// total mass to be 1 within `sum_tol`.
struct ProbabilityVector {
  Vector v;

  int dim() const { return static_cast<int>(v.size()); }
};

ProbabilityVector make_probability(Vector v, double entry_tol = kProbabilityTol,
                                   double sum_tol = kProbabilityTol);
ProbabilityVector uniform_probability(int dim);
ProbabilityVector point_mass(int state, int dim);

// Fixed-step RK4 for dp/dt = P(t) p on [t0, t1]. The final step shrinks to hit
// t1 exactly. P(t) is validated at the start of every step.
ProbabilityVector propagate(const std::function<Matrix(double)>& P,
                            const ProbabilityVector& p0, double t0, double t1,
                            double dt = 1e-3);
ProbabilityVector propagate(const Generator& P, const ProbabilityVector& p0,
                            double t0, double t1, double dt = 1e-3);

// Kronecker product, row-major pairing: joint index of (i, j) with j running
// over the second factor is i * cols(b) + j.
Matrix kron(const Matrix& a, const Matrix& b);

// How a joint generator on r * n states splits across the (z, x) product
// structure. States are indexed s = z * n + x.
//
//   Uncoupled:       z-jumps ignore x, x-jumps ignore z.
//   Cascade:         z-jumps ignore x; x-rates may depend on z.
//   Decomposable:    no single jump changes both coordinates, but z-rates
//                    depend on x.
//   NonDecomposable: some jump moves both coordinates at once.
enum class CouplingClass { NonDecomposable, Decomposable, Cascade, Uncoupled };

const char* to_string(CouplingClass c);

struct CouplingReport {
  CouplingClass cls = CouplingClass::NonDecomposable;
  // True when the joint law factorizes for all product initial conditions,
  // which for this representation means the chains are uncoupled.
  bool diagonalizable = false;
};

CouplingReport classify_coupling(
    const std::vector<std::pair<JumpMatrix, double>>& jumps, int r, int n);

// Least-squares split of a joint generator on r * n states into
// kron(C, I_n) + blockdiag-style x-part averaged over z. Returns the (A, C)
// pair when the reassembled matrix matches within `tol` in infinity norm.
std::optional<std::pair<Generator, Generator>> diagonal_parts(
    const Generator& joint, int r, int n, double tol = 1e-9);

// Marginals of a joint distribution on r * n states: first the z-marginal
// (dim r), then the x-marginal (dim n).
std::pair<ProbabilityVector, ProbabilityVector> marginals(
    const ProbabilityVector& joint, int r, int n);

}  // namespace cascade
