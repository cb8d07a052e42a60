#include "cascade/bellman.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>

namespace cascade {

namespace {

// Backward grids run from T down to 0; a short first segment absorbs any
// remainder so the last point is exactly 0.
std::vector<double> backward_grid(double T, double dt) {
  if (!(dt > 0.0)) throw InvalidStep("solver: dt must be positive");
  if (T < 0.0) throw TimeOutOfRange("solver: horizon must be nonnegative");
  std::vector<double> ts;
  const long long m = static_cast<long long>(std::floor(T / dt + 1e-9));
  ts.reserve(static_cast<std::size_t>(m) + 2);
  for (long long k = 0; k <= m; ++k) ts.push_back(T - static_cast<double>(k) * dt);
  if (ts.back() > 1e-12 * std::max(1.0, T)) ts.push_back(0.0);
  else ts.back() = 0.0;
  return ts;
}

template <class State>
void check_bounded(const State& y) {
  if (!y.allFinite() || y.cwiseAbs().maxCoeff() > 1e12)
    throw StepTooLarge("solver: iterate left the trust region (|K| > 1e12); reduce dt");
}

// RK4 along the descending time grid; returns states in ascending time order.
// The rhs writes its result into the provided slot; stage buffers are reused
// across steps so the hot loop allocates only the history entries.
template <class State, class Rhs>
std::vector<State> integrate_backward(State terminal,
                                      const std::vector<double>& ts,
                                      Rhs&& rhs) {
  std::vector<State> out;
  out.reserve(ts.size());
  State y = std::move(terminal);
  check_bounded(y);
  out.push_back(y);
  State k1 = y, k2 = y, k3 = y, k4 = y, yt = y;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double t = ts[k];
    const double h = ts[k] - ts[k + 1];
    rhs(t, y, k1);
    yt = y - (0.5 * h) * k1;
    rhs(t - 0.5 * h, yt, k2);
    yt = y - (0.5 * h) * k2;
    rhs(t - 0.5 * h, yt, k3);
    yt = y - h * k3;
    rhs(t - h, yt, k4);
    y -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_bounded(y);
    out.push_back(y);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

int index_on(const std::vector<double>& grid, double t, double T,
             const char* who) {
  if (t < -1e-12 || t > T + 1e-12)
    throw TimeOutOfRange(std::string(who) + ": t = " + std::to_string(t) +
                         " outside [0, " + std::to_string(T) + "]");
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  const auto idx = (it - grid.begin()) - 1;
  return static_cast<int>(std::max<std::ptrdiff_t>(0, idx));
}

void check_cost_dims(const CascadeModel& model, const CostSpec& cost, double T) {
  const Matrix LT = cost.running(T);
  const Matrix PhiT = cost.terminal(T);
  if (LT.rows() != model.n || LT.cols() != model.r)
    throw DimensionMismatch("cost: L must be n x r");
  if (PhiT.rows() != model.n || PhiT.cols() != model.r)
    throw DimensionMismatch("cost: Phi must be n x r");
}

}  // namespace

int BellmanSolution::index_at(double t) const {
  return index_on(grid, t, T, "BellmanSolution");
}

int JointBellmanSolution::index_at(double t) const {
  return index_on(grid, t, T, "JointBellmanSolution");
}

int DiagSolution::index_at(double t) const {
  return index_on(grid, t, T, "DiagSolution");
}

BellmanSolution solve_bellman(const CascadeModel& model, const CostSpec& cost,
                              double T, double dt) {
  validate_model(model);
  check_cost_dims(model, cost, T);
  const int r = model.r, n = model.n, p = model.p;

  // Per driver state, A(z)^T stacks on top of every B_j(z)^T so the z-loop
  // issues one product per state; switching terms land in per-control slabs.
  const int m = (1 + p) * n;
  std::vector<Matrix> MT(static_cast<std::size_t>(r), Matrix(m, n));
  for (int z = 0; z < r; ++z) {
    MT[static_cast<std::size_t>(z)].topRows(n) = model.A[z].transpose();
    for (int j = 0; j < p; ++j)
      MT[static_cast<std::size_t>(z)].middleRows((1 + j) * n, n) =
          model.B[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)].transpose();
  }
  const Matrix A0T = model.A0.transpose();

  // With no time dependence the running cost is one matrix for the whole
  // sweep; the rhs then runs allocation-free.
  const bool const_running = !cost.L_t && cost.alpha == 0.0;
  const Matrix L0 = const_running ? cost.running(0.0) : Matrix();
  Vector stage(m);
  std::vector<Matrix> S(static_cast<std::size_t>(p), Matrix(n, r));
  Vector s(p);
  Eigen::ArrayXXd uw(n, r);
  auto rhs = [&](double t, const Matrix& K, Matrix& g) {
    if (const_running) g = -L0;
    else g = -cost.running(t);
    g.noalias() -= K * model.C;
    g.noalias() -= A0T * K;
    for (int z = 0; z < r; ++z) {
      stage.noalias() = MT[static_cast<std::size_t>(z)] * K.col(z);
      g.col(z) -= stage.head(n);
      for (int j = 0; j < p; ++j)
        S[static_cast<std::size_t>(j)].col(z) = stage.segment((1 + j) * n, n);
    }
    // Zero and Quadratic penalties separate per coordinate, so the box
    // minimum vectorizes over the whole grid; only Custom scans per state.
    if (cost.psi == CostSpec::Psi::Zero) {
      for (int j = 0; j < p; ++j) {
        const auto sj = S[static_cast<std::size_t>(j)].array();
        g.array() -= (model.lo[j] * sj).min(model.hi[j] * sj);
      }
    } else if (cost.psi == CostSpec::Psi::Quadratic) {
      for (int j = 0; j < p; ++j) {
        const auto sj = S[static_cast<std::size_t>(j)].array();
        uw = (-0.5 * sj).max(model.lo[j]).min(model.hi[j]);
        g.array() -= uw * sj + uw.square();
      }
    } else {
      for (int z = 0; z < r; ++z)
        for (int x = 0; x < n; ++x) {
          for (int j = 0; j < p; ++j)
            s[j] = S[static_cast<std::size_t>(j)](x, z);
          g(x, z) -= minimize_control_value(s, cost, model.lo, model.hi);
        }
    }
  };

  const auto ts = backward_grid(T, dt);
  BellmanSolution sol;
  sol.K = integrate_backward(cost.terminal(T), ts, rhs);
  sol.grid.assign(ts.rbegin(), ts.rend());
  sol.model = model;
  sol.cost = cost;
  sol.T = T;
  sol.dt = dt;
  return sol;
}

Vector optimal_control(const BellmanSolution& sol, double t, int z, int x) {
  const auto& model = sol.model;
  if (z < 0 || z >= model.r)
    throw IndexOutOfRange("optimal_control: z = " + std::to_string(z));
  if (x < 0 || x >= model.n)
    throw IndexOutOfRange("optimal_control: x = " + std::to_string(x));
  const Matrix& K = sol.K_at(t);
  const Vector w = K.col(z);
  Vector s(model.p);
  for (int j = 0; j < model.p; ++j)
    s[j] = model.B[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)].col(x).dot(w);
  return minimize_control_term(s, sol.cost, model.lo, model.hi).u;
}

double optimal_value(const BellmanSolution& sol, int z0, int x0) {
  if (z0 < 0 || z0 >= sol.model.r)
    throw IndexOutOfRange("optimal_value: z0 = " + std::to_string(z0));
  if (x0 < 0 || x0 >= sol.model.n)
    throw IndexOutOfRange("optimal_value: x0 = " + std::to_string(x0));
  return sol.K.front()(x0, z0);
}

double optimal_value(const BellmanSolution& sol, const ProbabilityVector& pz0,
                     int x0) {
  if (pz0.dim() != sol.model.r)
    throw DimensionMismatch("optimal_value: pz0 has dim " +
                            std::to_string(pz0.dim()) + ", expected " +
                            std::to_string(sol.model.r));
  if (x0 < 0 || x0 >= sol.model.n)
    throw IndexOutOfRange("optimal_value: x0 = " + std::to_string(x0));
  return sol.K.front().row(x0).dot(pz0.v);
}

Policy extract_policy(const BellmanSolution& sol) {
  const auto& model = sol.model;
  Policy policy;
  policy.kind = Policy::Kind::Tabulated;
  policy.grid = sol.grid;
  policy.table.resize(sol.grid.size());
  Vector s(model.p);
  for (std::size_t k = 0; k < sol.grid.size(); ++k) {
    auto& slabs = policy.table[k];
    slabs.assign(static_cast<std::size_t>(model.p), Matrix::Zero(model.n, model.r));
    for (int z = 0; z < model.r; ++z) {
      const Vector w = sol.K[k].col(z);
      for (int x = 0; x < model.n; ++x) {
        for (int j = 0; j < model.p; ++j)
          s[j] = model.B[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)].col(x).dot(w);
        const Vector u = minimize_control_term(s, sol.cost, model.lo, model.hi).u;
        for (int j = 0; j < model.p; ++j) slabs[static_cast<std::size_t>(j)](x, z) = u[j];
      }
    }
  }
  return policy;
}

JointBellmanSolution solve_coupled_baseline(const CascadeModel& model,
                                            const CostSpec& cost, double T,
                                            double dt) {
  validate_model(model);
  check_cost_dims(model, cost, T);
  const int r = model.r, n = model.n, p = model.p, N = r * n;

  // Flat generator of the joint chain at u = 0 and the control directions,
  // stored transposed: the backward equation applies the adjoint.
  Matrix P0T = kron(model.C, Matrix::Identity(n, n));
  for (int z = 0; z < r; ++z)
    P0T.block(z * n, z * n, n, n) += model.A0 + model.A[z];
  P0T.transposeInPlace();
  std::vector<Matrix> BT(static_cast<std::size_t>(p), Matrix::Zero(N, N));
  for (int j = 0; j < p; ++j) {
    for (int z = 0; z < r; ++z)
      BT[static_cast<std::size_t>(j)].block(z * n, z * n, n, n) =
          model.B[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)];
    BT[static_cast<std::size_t>(j)].transposeInPlace();
  }

  auto flatten = [&](const Matrix& M) {
    Vector v(N);
    for (int z = 0; z < r; ++z)
      for (int x = 0; x < n; ++x) v[z * n + x] = M(x, z);
    return v;
  };

  const bool const_running = !cost.L_t && cost.alpha == 0.0;
  Vector L0;
  if (const_running) L0 = flatten(cost.running(0.0));
  Matrix sv(N, p);
  Vector s(p);
  auto rhs = [&](double t, const Vector& k, Vector& g) {
    if (const_running) g = -L0;
    else g = -flatten(cost.running(t));
    g.noalias() -= P0T * k;
    for (int j = 0; j < p; ++j)
      sv.col(j).noalias() = BT[static_cast<std::size_t>(j)] * k;
    for (int idx = 0; idx < N; ++idx) {
      s = sv.row(idx);
      g[idx] -= minimize_control_value(s, cost, model.lo, model.hi);
    }
  };

  const auto ts = backward_grid(T, dt);
  JointBellmanSolution sol;
  sol.k = integrate_backward(Vector(flatten(cost.terminal(T))), ts, rhs);
  sol.grid.assign(ts.rbegin(), ts.rend());
  sol.r = r;
  sol.n = n;
  sol.T = T;
  sol.dt = dt;
  return sol;
}

double identity_gap(const BellmanSolution& a, const JointBellmanSolution& b) {
  if (a.grid.size() != b.grid.size() || a.model.r != b.r || a.model.n != b.n)
    throw DimensionMismatch("identity_gap: solutions use different grids");
  double gap = 0.0;
  for (std::size_t k = 0; k < a.grid.size(); ++k)
    for (int z = 0; z < b.r; ++z)
      for (int x = 0; x < b.n; ++x)
        gap = std::max(gap, std::abs(a.K[k](x, z) - b.k[k][z * b.n + x]));
  return gap;
}

double PartialFeedbackSolution::value(int x0) const {
  if (x0 < 0 || x0 >= sol.model.n)
    throw IndexOutOfRange("partial value: x0 = " + std::to_string(x0));
  return sol.K.front().row(x0).dot(pz.front());
}

PartialFeedbackSolution solve_partial_feedback(const CascadeModel& model,
                                               const CostSpec& cost, double T,
                                               double dt,
                                               const ProbabilityVector& pz0) {
  validate_model(model);
  check_cost_dims(model, cost, T);
  if (pz0.dim() != model.r)
    throw DimensionMismatch("solve_partial_feedback: pz0 has dim " +
                            std::to_string(pz0.dim()) + ", expected " +
                            std::to_string(model.r));
  const int r = model.r, n = model.n, p = model.p;
  const auto ts = backward_grid(T, dt);

  // The driver law at every RK4 stage time, built by one ascending sweep of
  // matrix exponential increments (the step gaps repeat, so the factor is
  // cached per distinct gap).
  std::vector<double> stage;
  stage.reserve(ts.size() * 2);
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double h = ts[k] - ts[k + 1];
    stage.push_back(ts[k]);
    stage.push_back(ts[k] - 0.5 * h);
  }
  stage.push_back(ts.back());
  std::sort(stage.begin(), stage.end());
  stage.erase(std::unique(stage.begin(), stage.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-15; }),
              stage.end());

  std::vector<Vector> cs(stage.size());
  {
    Matrix E;
    double cached_gap = -1.0;
    Vector c = pz0.v;
    if (stage.front() > 0.0)
      c = (Matrix(model.C * stage.front()).exp() * c).eval();
    cs[0] = c;
    for (std::size_t i = 1; i < stage.size(); ++i) {
      const double gap = stage[i] - stage[i - 1];
      if (std::abs(gap - cached_gap) > 1e-15) {
        E = Matrix(model.C * gap).exp();
        cached_gap = gap;
      }
      c = (E * c).eval();
      cs[i] = c;
    }
  }
  auto c_of = [&](double t) -> const Vector& {
    auto it = std::lower_bound(stage.begin(), stage.end(), t);
    std::size_t i = static_cast<std::size_t>(it - stage.begin());
    if (i == stage.size() || (i > 0 && t - stage[i - 1] < stage[i] - t)) --i;
    if (std::abs(stage[i] - t) > 1e-6)
      throw TimeOutOfRange("solve_partial_feedback: no driver law at t = " +
                           std::to_string(t));
    return cs[i];
  };

  std::vector<Matrix> AT(static_cast<std::size_t>(r));
  for (int z = 0; z < r; ++z) AT[z] = model.A[z].transpose();
  const Matrix A0T = model.A0.transpose();

  std::vector<Matrix> Sz(static_cast<std::size_t>(r));
  Vector s(p);
  auto rhs = [&](double t, const Matrix& K, Matrix& g) {
    const Vector& c = c_of(t);
    Matrix Sbar = Matrix::Zero(n, p);
    for (int z = 0; z < r; ++z) {
      auto& S = Sz[static_cast<std::size_t>(z)];
      S.resize(n, p);
      const Vector w = K.col(z);
      for (int j = 0; j < p; ++j)
        S.col(j).noalias() = model.B[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)].transpose() * w;
      Sbar += c[z] * S;
    }
    g = -(K * model.C) - cost.running(t);
    g.noalias() -= A0T * K;
    for (int z = 0; z < r; ++z)
      g.col(z).noalias() -= AT[static_cast<std::size_t>(z)] * K.col(z);
    for (int x = 0; x < n; ++x) {
      s = Sbar.row(x);
      const ControlMin cm = minimize_control_term(s, cost, model.lo, model.hi);
      const double psi = cost.psi_value(cm.u);
      // One control for every z; each column pays its own switching term, so
      // K stays the exact conditional cost of the induced feedback.
      for (int z = 0; z < r; ++z)
        g(x, z) -= Sz[static_cast<std::size_t>(z)].row(x).dot(cm.u) + psi;
    }
  };

  PartialFeedbackSolution out;
  out.sol.K = integrate_backward(cost.terminal(T), ts, rhs);
  out.sol.grid.assign(ts.rbegin(), ts.rend());
  out.sol.model = model;
  out.sol.cost = cost;
  out.sol.T = T;
  out.sol.dt = dt;

  out.pz.reserve(out.sol.grid.size());
  out.controls.reserve(out.sol.grid.size());
  for (std::size_t k = 0; k < out.sol.grid.size(); ++k) {
    const Vector& c = c_of(out.sol.grid[k]);
    out.pz.push_back(c);
    const Matrix& K = out.sol.K[k];
    Matrix Sbar = Matrix::Zero(n, p);
    for (int z = 0; z < r; ++z)
      for (int j = 0; j < p; ++j)
        Sbar.col(j).noalias() +=
            c[z] * (model.B[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)].transpose() * K.col(z));
    Matrix U(n, p);
    for (int x = 0; x < n; ++x) {
      s = Sbar.row(x);
      U.row(x) = minimize_control_term(s, cost, model.lo, model.hi).u.transpose();
    }
    out.controls.push_back(std::move(U));
  }
  return out;
}

DiagSolution solve_diagonalizable(const CascadeModel& model,
                                  const CostSpec& cost, double T, double dt,
                                  DiagMode mode,
                                  const std::optional<ProbabilityVector>& c) {
  validate_model(model);
  check_cost_dims(model, cost, T);
  const int r = model.r, n = model.n, p = model.p;

  Matrix Abar;                 // n x n, added to A0
  std::vector<Matrix> Bbar;    // p blocks
  Vector l_weight;             // r weights applied to L and Phi columns

  auto columns_equal = [&](const Matrix& M) {
    for (int z = 1; z < r; ++z)
      if ((M.col(z) - M.col(0)).cwiseAbs().maxCoeff() > 1e-12) return false;
    return true;
  };

  if (mode == DiagMode::C1) {
    for (int z = 1; z < r; ++z)
      if ((model.A[z] - model.A[0]).cwiseAbs().maxCoeff() > kGeneratorTol)
        throw PreconditionNotMet("diagonalizable C1: A depends on the driver state");
    for (int j = 0; j < p; ++j)
      for (int z = 1; z < r; ++z)
        if ((model.B[j][z] - model.B[j][0]).cwiseAbs().maxCoeff() > kGeneratorTol)
          throw PreconditionNotMet("diagonalizable C1: B depends on the driver state");
    if (!columns_equal(cost.terminal(T)) || !columns_equal(cost.running(T)) ||
        !columns_equal(cost.running(0.0)))
      throw PreconditionNotMet("diagonalizable C1: cost depends on the driver state");
    Abar = model.A[0];
    Bbar.reserve(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) Bbar.push_back(model.B[j][0]);
    l_weight = Vector::Zero(r);
    l_weight[0] = 1.0;
  } else {
    if (!c) throw PreconditionNotMet("diagonalizable weighted: driver law c is required");
    if (c->dim() != r)
      throw DimensionMismatch("diagonalizable weighted: c has dim " +
                              std::to_string(c->dim()) + ", expected " +
                              std::to_string(r));
    if ((model.C * c->v).cwiseAbs().maxCoeff() > 1e-9)
      throw PreconditionNotMet("diagonalizable weighted: c is not stationary for C");
    Abar = Matrix::Zero(n, n);
    Bbar.assign(static_cast<std::size_t>(p), Matrix::Zero(n, n));
    for (int z = 0; z < r; ++z) {
      Abar += c->v[z] * model.A[z];
      for (int j = 0; j < p; ++j)
        Bbar[static_cast<std::size_t>(j)] += c->v[z] * model.B[j][z];
    }
    l_weight = c->v;
  }

  const Matrix GT = (model.A0 + Abar).transpose();
  std::vector<Matrix> BbarT(Bbar.size());
  for (std::size_t j = 0; j < Bbar.size(); ++j) BbarT[j] = Bbar[j].transpose();

  Matrix S(n, p);
  Vector s(p);
  auto rhs = [&](double t, const Vector& k, Vector& g) {
    g = -(cost.running(t) * l_weight);
    g.noalias() -= GT * k;
    for (int j = 0; j < p; ++j)
      S.col(j).noalias() = BbarT[static_cast<std::size_t>(j)] * k;
    for (int x = 0; x < n; ++x) {
      s = S.row(x);
      g[x] -= minimize_control_value(s, cost, model.lo, model.hi);
    }
  };

  const auto ts = backward_grid(T, dt);
  DiagSolution sol;
  sol.k = integrate_backward(Vector(cost.terminal(T) * l_weight), ts, rhs);
  sol.grid.assign(ts.rbegin(), ts.rend());
  sol.T = T;
  sol.dt = dt;
  return sol;
}

double costate_verify(const CascadeModel& model, const CostSpec& cost,
                      const BellmanSolution& sol) {
  check_cost_dims(model, cost, sol.T);
  const int r = model.r, n = model.n, p = model.p;
  std::vector<Matrix> GT(static_cast<std::size_t>(r));
  for (int z = 0; z < r; ++z) GT[z] = (model.A0 + model.A[z]).transpose();

  Vector s(p);
  auto rhs = [&](double t, const Matrix& Q, Matrix& g) {
    g = -(Q * model.C) - cost.running(t);
    for (int z = 0; z < r; ++z) {
      const Vector qz = Q.col(z);
      g.col(z).noalias() -= GT[static_cast<std::size_t>(z)] * qz;
      for (int x = 0; x < n; ++x) {
        // The control plugged in here comes from the value solution, not from
        // re-minimizing against q; matching trajectories certify K.
        const Vector u = optimal_control(sol, t, z, x);
        for (int j = 0; j < p; ++j)
          s[j] = model.B[static_cast<std::size_t>(j)][static_cast<std::size_t>(z)].col(x).dot(qz);
        g(x, z) -= s.dot(u) + cost.psi_value(u);
      }
    }
  };

  const auto ts = backward_grid(sol.T, sol.dt);
  const auto Q = integrate_backward(cost.terminal(sol.T), ts, rhs);
  if (Q.size() != sol.K.size())
    throw DimensionMismatch("costate_verify: grid mismatch with the solution");
  double dev = 0.0;
  for (std::size_t k = 0; k < Q.size(); ++k)
    dev = std::max(dev, (Q[k] - sol.K[k]).cwiseAbs().maxCoeff());
  return dev;
}

}  // namespace cascade
