#include "cascade/singular.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cascade/zoo.hpp"

namespace cascade {

namespace {

void reach(const Matrix& X, int start, bool forward, std::vector<char>& seen) {
  const int d = static_cast<int>(X.rows());
  std::vector<int> stack{start};
  seen.assign(static_cast<std::size_t>(d), 0);
  seen[static_cast<std::size_t>(start)] = 1;
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (int t = 0; t < d; ++t) {
      if (t == s || seen[static_cast<std::size_t>(t)]) continue;
      const double rate = forward ? X(t, s) : X(s, t);
      if (rate > 1e-14) {
        seen[static_cast<std::size_t>(t)] = 1;
        stack.push_back(t);
      }
    }
  }
}

}  // namespace

ProbabilityVector steady_state(const Generator& X) {
  const int d = X.dim();
  if (d <= 0) throw DimensionMismatch("steady_state: empty generator");
  std::vector<char> seen;
  reach(X.m, 0, true, seen);
  if (std::count(seen.begin(), seen.end(), 1) != d)
    throw Reducible("steady_state: chain is not irreducible (unreachable states)");
  reach(X.m, 0, false, seen);
  if (std::count(seen.begin(), seen.end(), 1) != d)
    throw Reducible("steady_state: chain is not irreducible (absorbing set)");

  const Vector e = Vector::Ones(d);
  const Matrix M = e * e.transpose() + X.m.transpose() * X.m;
  Vector p = M.ldlt().solve(e);
  const double residual = (X.m * p).cwiseAbs().maxCoeff();
  if (!(residual < 1e-10))
    throw SingularSolve("steady_state: residual " + std::to_string(residual));
  return make_probability(std::move(p));
}

Generator cat_X(const Vector& c, const Vector& u) {
  if (c.size() != 3 || u.size() != 3)
    throw DimensionMismatch("cat_X: c and u must have 3 entries");
  const auto entry = binary_decision(3, default_price_generator(3, PriceKind::Uniform, 1.0));
  const auto& model = entry.model;
  Matrix X = model.A0;
  for (int z = 0; z < 3; ++z)
    X += c[z] * (model.A[static_cast<std::size_t>(z)] +
                 u[z] * model.B[0][static_cast<std::size_t>(z)]);
  return make_generator(std::move(X), 1e-9, "cat_X");
}

Vector cat_p(const Vector& c, const Vector& u) {
  if (c.size() != 3 || u.size() != 3)
    throw DimensionMismatch("cat_p: c and u must have 3 entries");
  Vector p(3);
  p[0] = 0.5 * (c[2] * (u[2] + 0.5) - c[1] * (u[1] - 0.5));
  p[1] = 0.5 * (c[0] * (u[0] + 0.5) - c[2] * (u[2] - 0.5));
  p[2] = 0.5 * (c[1] * (u[1] + 0.5) - c[0] * (u[0] - 0.5));
  return p;
}

QpProblem build_qp(const Vector& c) {
  if (c.size() != 3) throw DimensionMismatch("build_qp: c must have 3 entries");
  for (int i = 0; i < 3; ++i)
    if (c[i] < -1e-12) throw BadState("build_qp: c must be nonnegative");
  if (std::abs(c.sum() - 1.0) > 1e-9)
    throw BadState("build_qp: c must sum to 1");

  QpProblem qp;
  qp.c = c;
  qp.A.setZero(3, 3);
  qp.A << 0.0, -c[1], c[2],
          c[0], 0.0, -c[2],
          -c[0], c[1], 0.0;
  qp.b.resize(3);
  qp.b[0] = -1.0 / 6.0 + 0.25 * (c[1] + c[2]);
  qp.b[1] = -1.0 / 6.0 + 0.25 * (c[0] + c[2]);
  qp.b[2] = -1.0 / 6.0 + 0.25 * (c[0] + c[1]);
  qp.H = 0.5 * qp.A.transpose() * qp.A;
  qp.f = qp.A.transpose() * qp.b;
  qp.k = qp.b.squaredNorm();
  qp.lo = Vector::Constant(3, -0.5);
  qp.hi = Vector::Constant(3, 0.5);
  return qp;
}

const char* to_string(QpClass c) {
  switch (c) {
    case QpClass::InteriorZero: return "InteriorZero";
    case QpClass::BoundaryPositive: return "BoundaryPositive";
  }
  return "?";
}

namespace {

Vector project_box(Vector u, const Vector& lo, const Vector& hi) {
  for (Eigen::Index i = 0; i < u.size(); ++i)
    u[i] = std::min(hi[i], std::max(lo[i], u[i]));
  return u;
}

// Exact projection of alpha0 onto {G alpha <= h} for tiny dimensions: active
// sets are enumerated, each candidate checked for primal feasibility and dual
// nonnegativity. The projection is unique, so the first certified candidate
// is the answer.
Vector project_polytope(const Vector& alpha0, const Matrix& G, const Vector& h) {
  const int mrows = static_cast<int>(G.rows());
  const int d = static_cast<int>(G.cols());
  auto feasible = [&](const Vector& a) {
    return mrows == 0 || ((G * a - h).maxCoeff() <= 1e-10);
  };
  if (feasible(alpha0)) return alpha0;

  Vector best = alpha0;
  double best_dist = std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(mrows));
  for (int i = 0; i < mrows; ++i) idx[static_cast<std::size_t>(i)] = i;

  std::vector<int> subset;
  std::function<void(int)> visit = [&](int start) {
    if (!subset.empty()) {
      const int s = static_cast<int>(subset.size());
      Matrix Gw(s, d);
      Vector hw(s);
      for (int i = 0; i < s; ++i) {
        Gw.row(i) = G.row(subset[static_cast<std::size_t>(i)]);
        hw[i] = h[subset[static_cast<std::size_t>(i)]];
      }
      const Matrix GG = Gw * Gw.transpose();
      Eigen::FullPivLU<Matrix> lu(GG);
      if (lu.rank() == s) {
        const Vector lambda = lu.solve(Gw * alpha0 - hw);
        if (lambda.minCoeff() >= -1e-10) {
          const Vector a = alpha0 - Gw.transpose() * lambda;
          if (feasible(a)) {
            const double dist = (a - alpha0).squaredNorm();
            if (dist < best_dist) {
              best_dist = dist;
              best = a;
            }
          }
        }
      }
    }
    if (static_cast<int>(subset.size()) == d) return;
    for (int i = start; i < mrows; ++i) {
      subset.push_back(i);
      visit(i + 1);
      subset.pop_back();
    }
  };
  visit(0);
  if (!std::isfinite(best_dist))
    throw SingularSolve("qp: polytope projection found no certified point");
  return best;
}

}  // namespace

QpSolution solve_box_qp(const QpProblem& qp) {
  const int p = static_cast<int>(qp.f.size());
  const double gamma = 1.0 / (qp.H.norm() + 1.0);
  Vector u = project_box(Vector::Zero(p), qp.lo, qp.hi);

  QpSolution sol;
  sol.max_iterations = true;
  for (long long it = 0; it < 100000; ++it) {
    const Vector grad = qp.H * u + qp.f;
    const Vector next = project_box(u - gamma * grad, qp.lo, qp.hi);
    const double move = (u - next).cwiseAbs().maxCoeff() / gamma;
    u = next;
    if (move < 1e-12) {
      sol.max_iterations = false;
      break;
    }
  }

  // Minimum-norm point of the optimal face. The face is u + ker([H; g^T])
  // cut by the box; project -N^T u onto that polytope in kernel coordinates.
  const Vector g = qp.H * u + qp.f;
  Matrix stacked(p + 1, p);
  stacked.topRows(p) = qp.H;
  stacked.bottomRows(1) = g.transpose();
  Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = (sv.size() ? sv[0] : 0.0) * 1e-10 + 1e-300;
  std::vector<int> kernel_cols;
  for (int i = 0; i < p; ++i)
    if (i >= sv.size() || sv[i] <= cutoff) kernel_cols.push_back(i);
  if (!kernel_cols.empty()) {
    const int d = static_cast<int>(kernel_cols.size());
    Matrix N(p, d);
    for (int i = 0; i < d; ++i)
      N.col(i) = svd.matrixV().col(kernel_cols[static_cast<std::size_t>(i)]);
    Matrix G(2 * p, d);
    Vector h(2 * p);
    G.topRows(p) = N;
    G.bottomRows(p) = -N;
    h.head(p) = qp.hi - u;
    h.tail(p) = u - qp.lo;
    const Vector alpha = project_polytope(Vector(-N.transpose() * u), G, h);
    u = project_box(u + N * alpha, qp.lo, qp.hi);
  }

  sol.u0 = u;
  sol.eta_star = qp.eta(u);
  for (int i = 0; i < p; ++i)
    if (u[i] - qp.lo[i] <= 1e-9 || qp.hi[i] - u[i] <= 1e-9) sol.active.push_back(i);
  sol.cls = sol.eta_star <= 1e-8 ? QpClass::InteriorZero : QpClass::BoundaryPositive;
  return sol;
}

std::pair<Vector, double> qp_oracle_grid(const QpProblem& qp, double step) {
  const int p = static_cast<int>(qp.f.size());
  if (!(step > 0.0)) throw InvalidStep("qp_oracle_grid: step must be positive");

  std::vector<long long> counts(static_cast<std::size_t>(p));
  double total = 1.0;
  for (int i = 0; i < p; ++i) {
    const double span = qp.hi[i] - qp.lo[i];
    if (span == 0.0) {
      counts[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    const double ratio = span / step;
    const long long k = std::llround(ratio);
    if (std::abs(ratio - static_cast<double>(k)) > 1e-9 * std::max(1.0, ratio))
      throw InvalidStep("qp_oracle_grid: step does not divide side " +
                        std::to_string(i));
    counts[static_cast<std::size_t>(i)] = k + 1;
    total *= static_cast<double>(k + 1);
  }
  if (total > 1e8) throw GridTooLarge("qp_oracle_grid: " + std::to_string(total) +
                                      " points");

  Vector u(p), best_u = qp.lo;
  double best = std::numeric_limits<double>::infinity();
  std::vector<long long> odo(static_cast<std::size_t>(p), 0);
  // Lexicographic scan, axis 0 slowest; strict improvement keeps the first.
  while (true) {
    for (int i = 0; i < p; ++i)
      u[i] = counts[static_cast<std::size_t>(i)] == 1
                 ? qp.lo[i]
                 : qp.lo[i] + step * static_cast<double>(odo[static_cast<std::size_t>(i)]);
    const double val = qp.eta(u);
    if (val < best) {
      best = val;
      best_u = u;
    }
    int axis = p - 1;
    while (axis >= 0 && ++odo[static_cast<std::size_t>(axis)] ==
                            counts[static_cast<std::size_t>(axis)]) {
      odo[static_cast<std::size_t>(axis)] = 0;
      --axis;
    }
    if (axis < 0) break;
  }

  double fine = step;
  for (int round = 0; round < 2; ++round) {
    const Vector center = best_u;
    fine /= 10.0;
    std::vector<std::vector<double>> axes(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i)
      for (int m = -10; m <= 10; ++m) {
        const double v = center[i] + fine * static_cast<double>(m);
        if (v >= qp.lo[i] - 1e-12 && v <= qp.hi[i] + 1e-12)
          axes[static_cast<std::size_t>(i)].push_back(
              std::min(qp.hi[i], std::max(qp.lo[i], v)));
      }
    std::vector<std::size_t> pos(static_cast<std::size_t>(p), 0);
    while (true) {
      for (int i = 0; i < p; ++i)
        u[i] = axes[static_cast<std::size_t>(i)][pos[static_cast<std::size_t>(i)]];
      const double val = qp.eta(u);
      if (val < best) {
        best = val;
        best_u = u;
      }
      int axis = p - 1;
      while (axis >= 0 && ++pos[static_cast<std::size_t>(axis)] ==
                              axes[static_cast<std::size_t>(axis)].size()) {
        pos[static_cast<std::size_t>(axis)] = 0;
        --axis;
      }
      if (axis < 0) break;
    }
  }
  return {best_u, best};
}

SingularDiagnostics state_costate_integrate(
    const Vector& c, const std::function<Vector(double)>& u_fn, double T,
    const ProbabilityVector& p0, const Vector& qT, double dt) {
  const int n = p0.dim();
  const int N = n - 1;
  if (N < 2) throw DimensionMismatch("state_costate: need at least 2 assets");
  const int r = N * (N - 1) / 2;
  if (c.size() != r)
    throw DimensionMismatch("state_costate: c has " + std::to_string(c.size()) +
                            " entries, expected " + std::to_string(r));
  if (qT.size() != n) throw DimensionMismatch("state_costate: qT must have dim n");
  if (!(dt > 0.0)) throw InvalidStep("state_costate: dt must be positive");
  if (T < 0.0) throw TimeOutOfRange("state_costate: T must be nonnegative");

  const auto entry =
      binary_decision(N, default_price_generator(r, PriceKind::Uniform, 1.0));
  const auto& model = entry.model;
  Matrix Xbase = model.A0;
  std::vector<Matrix> Mz(static_cast<std::size_t>(r));
  for (int z = 0; z < r; ++z) {
    Xbase += c[z] * model.A[static_cast<std::size_t>(z)];
    Mz[static_cast<std::size_t>(z)] = c[z] * model.B[0][static_cast<std::size_t>(z)];
  }
  auto X_of = [&](const Vector& u) {
    Matrix X = Xbase;
    for (int z = 0; z < r; ++z) X += u[z] * Mz[static_cast<std::size_t>(z)];
    return X;
  };
  auto control = [&](double t) {
    Vector u = u_fn(t);
    if (u.size() != r)
      throw DimensionMismatch("state_costate: control path must have dim " +
                              std::to_string(r));
    return u;
  };

  // Ascending grid with the short segment first, matching the backward grids.
  std::vector<double> grid;
  {
    const long long m = static_cast<long long>(std::floor(T / dt + 1e-9));
    for (long long k = 0; k <= m; ++k) grid.push_back(T - static_cast<double>(k) * dt);
    if (grid.back() > 1e-12 * std::max(1.0, T)) grid.push_back(0.0);
    else grid.back() = 0.0;
    std::reverse(grid.begin(), grid.end());
  }
  const std::size_t M = grid.size() - 1;

  Vector target = Vector::Constant(n, 1.0 / (2.0 * N));
  target[N] = 0.0;
  Vector qdiag = Vector::Ones(n);
  qdiag[N] = 0.0;

  auto p_rhs = [&](double t, const Vector& p) { return Vector(X_of(control(t)) * p); };
  auto q_rhs = [&](double t, const Vector& q, const Vector& p) {
    const Vector err = qdiag.cwiseProduct(p) - target;
    return Vector(-2.0 * err - X_of(control(t)).transpose() * q);
  };

  SingularDiagnostics out;
  out.grid = grid;
  out.p.resize(grid.size());
  out.q.resize(grid.size());
  std::vector<Vector> p_mid(M);

  // Forward sweep in two half-steps per segment so the midpoint states are
  // available to the backward sweep.
  Vector p = p0.v;
  out.p[0] = p;
  for (std::size_t k = 0; k < M; ++k) {
    const double h = grid[k + 1] - grid[k];
    for (int half = 0; half < 2; ++half) {
      const double t = grid[k] + 0.5 * h * half;
      const double hh = 0.5 * h;
      const Vector k1 = p_rhs(t, p);
      const Vector k2 = p_rhs(t + 0.5 * hh, Vector(p + 0.5 * hh * k1));
      const Vector k3 = p_rhs(t + 0.5 * hh, Vector(p + 0.5 * hh * k2));
      const Vector k4 = p_rhs(t + hh, Vector(p + hh * k3));
      p += (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (half == 0) p_mid[k] = p;
    }
    out.p[k + 1] = p;
  }

  Vector q = qT;
  out.q[M] = q;
  for (std::size_t k = M; k-- > 0;) {
    const double t = grid[k + 1];
    const double h = grid[k + 1] - grid[k];
    const Vector k1 = q_rhs(t, q, out.p[k + 1]);
    const Vector k2 = q_rhs(t - 0.5 * h, Vector(q - 0.5 * h * k1), p_mid[k]);
    const Vector k3 = q_rhs(t - 0.5 * h, Vector(q - 0.5 * h * k2), p_mid[k]);
    const Vector k4 = q_rhs(t - h, Vector(q - h * k3), out.p[k]);
    q -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.q[k] = q;
  }

  out.H.resize(grid.size());
  out.sigma.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vector u = control(grid[k]);
    const Vector err = qdiag.cwiseProduct(out.p[k]) - target;
    out.H[k] = err.squaredNorm() + out.q[k].dot(X_of(u) * out.p[k]);
    Vector sig(r);
    for (int z = 0; z < r; ++z)
      sig[z] = out.q[k].dot(Mz[static_cast<std::size_t>(z)] * out.p[k]);
    out.sigma[k] = std::move(sig);
  }
  return out;
}

std::pair<double, double> singular_closed_form(int N, double t) {
  if (N < 2) throw DimensionMismatch("singular_closed_form: need N >= 2");
  if (t < 0.0) throw TimeOutOfRange("singular_closed_form: t must be nonnegative");
  const double decay = std::exp(-2.0 * t);
  return {(1.0 - decay) / (2.0 * N), 0.5 * (1.0 + decay)};
}

RankOneSteady rank_one_steady(const Generator& A, const Vector& f, int j,
                              double u) {
  const int d = A.dim();
  if (f.size() != d) throw DimensionMismatch("rank_one_steady: f has wrong dim");
  if (j < 0 || j >= d) throw IndexOutOfRange("rank_one_steady: column " + std::to_string(j));
  if (std::abs(f.sum()) > 1e-9)
    throw PreconditionNotMet("rank_one_steady: perturbation must have zero column sum");

  const ProbabilityVector p0 = steady_state(A);
  Matrix X = A.m;
  X.col(j) += u * f;

  Eigen::JacobiSVD<Matrix> svd(A.m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv[0] * 1e-10;
  Vector g = Vector::Zero(d);
  {
    const Vector uf = svd.matrixU().transpose() * f;
    Vector scaled = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv[i] > cutoff) scaled[i] = uf[i] / sv[i];
    g = svd.matrixV() * scaled;
  }

  RankOneSteady out;
  const double denom = 1.0 + u * g[j];
  bool ok = std::abs(denom) > 1e-12;
  Vector p;
  if (ok) {
    p = p0.v - (p0.v[j] * u / denom) * g;
    const double mass = p.sum();
    ok = std::abs(mass) > 1e-12;
    if (ok) {
      p /= mass;
      out.formula_residual = (X * p).cwiseAbs().maxCoeff();
      ok = out.formula_residual < 1e-8 && p.minCoeff() > -1e-9;
    }
  }
  if (ok) {
    out.p = make_probability(std::move(p));
    out.used_formula = true;
  } else {
    out.p = steady_state(make_generator(X, 1e-9, "rank_one_steady"));
    out.used_formula = false;
    out.formula_residual = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace cascade
