#include "cascade/ctmc.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <cmath>
#include <map>

namespace cascade {

Matrix JumpMatrix::dense() const {
  Matrix m = Matrix::Zero(dim, dim);
  m(target, source) += 1.0;
  m(source, source) -= 1.0;
  return m;
}

JumpMatrix jump_matrix(int source, int target, int dim) {
  if (dim <= 0) throw DimensionMismatch("jump_matrix: dim must be positive");
  if (source < 0 || source >= dim || target < 0 || target >= dim)
    throw IndexOutOfRange("jump_matrix: state " +
                          std::to_string(source < 0 || source >= dim ? source : target) +
                          " outside [0, " + std::to_string(dim) + ")");
  if (source == target)
    throw SelfLoop("jump_matrix: source == target == " + std::to_string(source));
  return JumpMatrix{source, target, dim};
}

void validate_generator(const Matrix& m, double tol, const std::string& label) {
  if (m.rows() != m.cols())
    throw GeneratorInvalid(label + ": matrix is " + std::to_string(m.rows()) +
                           "x" + std::to_string(m.cols()) + ", expected square");
  const int d = static_cast<int>(m.rows());
  for (int j = 0; j < d; ++j) {
    double colsum = 0.0;
    for (int i = 0; i < d; ++i) {
      colsum += m(i, j);
      if (i != j && m(i, j) < -tol)
        throw GeneratorInvalid(label + ": negative off-diagonal entry " +
                               std::to_string(m(i, j)) + " at (" +
                               std::to_string(i) + ", " + std::to_string(j) + ")");
    }
    if (std::abs(colsum) > tol)
      throw GeneratorInvalid(label + ": column " + std::to_string(j) +
                             " sums to " + std::to_string(colsum) +
                             ", expected 0");
  }
}

Generator make_generator(Matrix m, double tol, const std::string& label) {
  validate_generator(m, tol, label);
  return Generator{std::move(m)};
}

Generator generator_from_jumps(
    const std::vector<std::pair<JumpMatrix, double>>& jumps, int dim) {
  if (dim <= 0) throw DimensionMismatch("generator_from_jumps: dim must be positive");
  Matrix m = Matrix::Zero(dim, dim);
  for (const auto& [jump, rate] : jumps) {
    if (jump.dim != dim)
      throw DimensionMismatch("generator_from_jumps: jump has dim " +
                              std::to_string(jump.dim) + ", expected " +
                              std::to_string(dim));
    if (rate < 0.0)
      throw NegativeRate("generator_from_jumps: rate " + std::to_string(rate) +
                         " for jump " + std::to_string(jump.source) + " -> " +
                         std::to_string(jump.target));
    m(jump.target, jump.source) += rate;
    m(jump.source, jump.source) -= rate;
  }
  return Generator{std::move(m)};
}

ProbabilityVector make_probability(Vector v, double entry_tol, double sum_tol) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] < -entry_tol || v[i] > 1.0 + entry_tol)
      throw BadState("probability entry " + std::to_string(v[i]) + " at index " +
                     std::to_string(i) + " outside [0, 1]");
    v[i] = std::min(1.0, std::max(0.0, v[i]));
  }
  const double sum = v.sum();
  if (std::abs(sum - 1.0) > sum_tol)
    throw BadState("probability mass " + std::to_string(sum) + ", expected 1");
  return ProbabilityVector{std::move(v)};
}

ProbabilityVector uniform_probability(int dim) {
  if (dim <= 0) throw DimensionMismatch("uniform_probability: dim must be positive");
  return ProbabilityVector{Vector::Constant(dim, 1.0 / dim)};
}

ProbabilityVector point_mass(int state, int dim) {
  if (state < 0 || state >= dim)
    throw IndexOutOfRange("point_mass: state " + std::to_string(state) +
                          " outside [0, " + std::to_string(dim) + ")");
  Vector v = Vector::Zero(dim);
  v[state] = 1.0;
  return ProbabilityVector{std::move(v)};
}

ProbabilityVector propagate(const std::function<Matrix(double)>& P,
                            const ProbabilityVector& p0, double t0, double t1,
                            double dt) {
  if (!(dt > 0.0)) throw InvalidStep("propagate: dt must be positive");
  if (t1 < t0) throw TimeOutOfRange("propagate: t1 < t0");
  Vector p = p0.v;
  auto step = [&](double t, double h) {
    Matrix Pt = P(t);
    validate_generator(Pt, kGeneratorTol,
                       "propagate: P(t) at t=" + std::to_string(t));
    const Vector k1 = Pt * p;
    const Vector k2 = P(t + 0.5 * h) * (p + 0.5 * h * k1);
    const Vector k3 = P(t + 0.5 * h) * (p + 0.5 * h * k2);
    const Vector k4 = P(t + h) * (p + h * k3);
    p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
  const long long full = static_cast<long long>(std::floor((t1 - t0) / dt + 1e-9));
  double t = t0;
  for (long long k = 0; k < full; ++k) {
    step(t, dt);
    t = t0 + static_cast<double>(k + 1) * dt;
  }
  if (t1 - t > 1e-15) step(t, t1 - t);
  return make_probability(std::move(p));
}

ProbabilityVector propagate(const Generator& P, const ProbabilityVector& p0,
                            double t0, double t1, double dt) {
  const Matrix m = P.m;
  return propagate([&m](double) { return m; }, p0, t0, t1, dt);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

const char* to_string(CouplingClass c) {
  switch (c) {
    case CouplingClass::NonDecomposable: return "NonDecomposable";
    case CouplingClass::Decomposable: return "Decomposable";
    case CouplingClass::Cascade: return "Cascade";
    case CouplingClass::Uncoupled: return "Uncoupled";
  }
  return "?";
}

CouplingReport classify_coupling(
    const std::vector<std::pair<JumpMatrix, double>>& jumps, int r, int n) {
  if (r <= 0 || n <= 0)
    throw DimensionMismatch("classify_coupling: r and n must be positive");
  const int dim = r * n;

  // Accumulate total rate per (source, target) pair; implicit zeros matter for
  // the comparisons below, so work with dense per-coordinate tables.
  std::map<std::pair<int, int>, double> rate;
  for (const auto& [jump, w] : jumps) {
    if (jump.dim != dim)
      throw DimensionMismatch("classify_coupling: jump dim " +
                              std::to_string(jump.dim) + ", expected " +
                              std::to_string(dim));
    if (w < 0.0) throw NegativeRate("classify_coupling: negative rate");
    rate[{jump.source, jump.target}] += w;
  }

  for (const auto& [key, w] : rate) {
    if (w == 0.0) continue;
    const int zs = key.first / n, xs = key.first % n;
    const int zt = key.second / n, xt = key.second % n;
    if (zs != zt && xs != xt)
      return {CouplingClass::NonDecomposable, false};
  }

  auto z_rate = [&](int zs, int zt, int x) {
    auto it = rate.find({zs * n + x, zt * n + x});
    return it == rate.end() ? 0.0 : it->second;
  };
  auto x_rate = [&](int z, int xs, int xt) {
    auto it = rate.find({z * n + xs, z * n + xt});
    return it == rate.end() ? 0.0 : it->second;
  };

  const double tol = 1e-12;
  bool z_ignores_x = true;
  for (int zs = 0; zs < r && z_ignores_x; ++zs)
    for (int zt = 0; zt < r && z_ignores_x; ++zt) {
      if (zs == zt) continue;
      const double ref = z_rate(zs, zt, 0);
      for (int x = 1; x < n; ++x)
        if (std::abs(z_rate(zs, zt, x) - ref) > tol) { z_ignores_x = false; break; }
    }
  if (!z_ignores_x) return {CouplingClass::Decomposable, false};

  bool x_ignores_z = true;
  for (int xs = 0; xs < n && x_ignores_z; ++xs)
    for (int xt = 0; xt < n && x_ignores_z; ++xt) {
      if (xs == xt) continue;
      const double ref = x_rate(0, xs, xt);
      for (int z = 1; z < r; ++z)
        if (std::abs(x_rate(z, xs, xt) - ref) > tol) { x_ignores_z = false; break; }
    }
  if (x_ignores_z) return {CouplingClass::Uncoupled, true};
  return {CouplingClass::Cascade, false};
}

std::optional<std::pair<Generator, Generator>> diagonal_parts(
    const Generator& joint, int r, int n, double tol) {
  if (joint.dim() != r * n)
    throw DimensionMismatch("diagonal_parts: joint dim " +
                            std::to_string(joint.dim()) + ", expected " +
                            std::to_string(r * n));
  const Matrix& P = joint.m;

  // Least-squares fit of P = kron(C, I_n) + kron(I_r, A). Off-diagonal blocks
  // determine C entries by the mean of the block diagonal; the leftover column
  // deficit of C is pushed into its diagonal so both factors stay generators,
  // and A is the average of the diagonal blocks after removing C's diagonal.
  Matrix C = Matrix::Zero(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      if (i == j) continue;
      C(i, j) = P.block(i * n, j * n, n, n).trace() / n;
    }
  for (int j = 0; j < r; ++j) C(j, j) = -C.col(j).sum();

  Matrix A = Matrix::Zero(n, n);
  for (int i = 0; i < r; ++i)
    A += P.block(i * n, i * n, n, n) - C(i, i) * Matrix::Identity(n, n);
  A /= r;

  const Matrix rebuilt = kron(C, Matrix::Identity(n, n)) +
                         kron(Matrix::Identity(r, r), A);
  if ((P - rebuilt).cwiseAbs().maxCoeff() > tol) return std::nullopt;

  try {
    return std::make_pair(make_generator(A, 1e-9, "diagonal_parts: A"),
                          make_generator(C, 1e-9, "diagonal_parts: C"));
  } catch (const GeneratorInvalid&) {
    return std::nullopt;
  }
}

std::pair<ProbabilityVector, ProbabilityVector> marginals(
    const ProbabilityVector& joint, int r, int n) {
  if (joint.dim() != r * n)
    throw DimensionMismatch("marginals: joint dim " + std::to_string(joint.dim()) +
                            ", expected " + std::to_string(r * n));
  Vector pz = Vector::Zero(r), px = Vector::Zero(n);
  for (int z = 0; z < r; ++z)
    for (int x = 0; x < n; ++x) {
      pz[z] += joint.v[z * n + x];
      px[x] += joint.v[z * n + x];
    }
  return {make_probability(std::move(pz)), make_probability(std::move(px))};
}

}  // namespace cascade
