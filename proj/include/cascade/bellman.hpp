#pragma once

#include "cascade/model.hpp"

namespace cascade {

// Backward value matrices K(t) on a fixed grid. K[k] is n x r; the value of
// starting at (z, x) at time grid[k] is K[k](x, z). The grid ascends from 0
// to T; lookups are piecewise-constant, left-closed on the segments.
struct BellmanSolution {
  std::vector<double> grid;
  std::vector<Matrix> K;
  CascadeModel model;
  CostSpec cost;
  double T = 0.0;
  double dt = 0.0;

  int index_at(double t) const;
  const Matrix& K_at(double t) const { return K[static_cast<std::size_t>(index_at(t))]; }
};

// Integrates the decoupled backward equation
//
//   dK/dt = -K C - L(t) - A0^T K - [A^T K] - minterm(K)
//
// with K(T) = Phi(T), where column z of [A^T K] is A[z]^T (K e_z) and column z
// of minterm(K) collects, per x, the box minimum of
// sum_j u_j (B[j][z]^T K e_z)(x) + psi(u). Classic RK4, fixed step, final
// partial step; throws StepTooLarge when the iterate blows past 1e12.
BellmanSolution solve_bellman(const CascadeModel& model, const CostSpec& cost,
                              double T, double dt);

// Minimizer of the switching term at (t, z, x) under the stored cost.
Vector optimal_control(const BellmanSolution& sol, double t, int z, int x);

double optimal_value(const BellmanSolution& sol, int z0, int x0);
double optimal_value(const BellmanSolution& sol, const ProbabilityVector& pz0,
                     int x0);

// Tabulated feedback evaluated from the stored K on the solver grid.
Policy extract_policy(const BellmanSolution& sol);

// Value function of the flat Bellman equation on the joint chain (dimension
// r * n, state s = z * n + x). Mathematically identical to solve_bellman
// entry-by-entry; kept dense as a cross-check and cost baseline.
struct JointBellmanSolution {
  std::vector<double> grid;
  std::vector<Vector> k;  // r * n entries each
  int r = 0, n = 0;
  double T = 0.0, dt = 0.0;

  int index_at(double t) const;
  double value(double t, int z, int x) const {
    return k[static_cast<std::size_t>(index_at(t))][z * n + x];
  }
};

JointBellmanSolution solve_coupled_baseline(const CascadeModel& model,
                                            const CostSpec& cost, double T,
                                            double dt);

// Largest |K - k| over the shared grid between the two solvers.
double identity_gap(const BellmanSolution& a, const JointBellmanSolution& b);

// Feedback restricted to (t, x): the driver is observed only through its law.
// The common control minimizes the pz(t)-weighted switching term; K then
// solves the same backward equation with that control substituted per column,
// so K(x, z) is the exact conditional cost of the induced policy and the
// value sum_z pz0[z] K(0)(x0, z) can only exceed the fully informed one.
struct PartialFeedbackSolution {
  BellmanSolution sol;
  std::vector<Vector> pz;         // driver law on the same grid
  std::vector<Matrix> controls;   // per grid point, n x p: common u at (x, j)

  double value(int x0) const;
};

PartialFeedbackSolution solve_partial_feedback(const CascadeModel& model,
                                               const CostSpec& cost, double T,
                                               double dt,
                                               const ProbabilityVector& pz0);

// Reduced scalar-per-x backward equations, valid under the matching
// sufficiency condition.
//   C1:        A, B, L, Phi do not depend on z; k(t) is the shared column.
//   Cweighted: the driver sits at a stationary law c (checked: |C c| <= 1e-9);
//              A and B rows are averaged under c.
enum class DiagMode { C1, Cweighted };

struct DiagSolution {
  std::vector<double> grid;
  std::vector<Vector> k;  // n entries each
  double T = 0.0, dt = 0.0;

  int index_at(double t) const;
  double value(int x0) const { return k.front()[x0]; }
};

DiagSolution solve_diagonalizable(const CascadeModel& model,
                                  const CostSpec& cost, double T, double dt,
                                  DiagMode mode,
                                  const std::optional<ProbabilityVector>& c = {});

// Integrates the per-driver-state costate equations backward under the policy
// induced by `sol` and returns max_{t, z} |q_z(t) - K(t) e_z|_inf. Small
// deviations certify that K solves the stationarity conditions of the joint
// problem and not merely the recursion it was built from.
double costate_verify(const CascadeModel& model, const CostSpec& cost,
                      const BellmanSolution& sol);

}  // namespace cascade
