#include "cascade/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cascade {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

// Zero column sums, any sign off the diagonal. B blocks satisfy this even
// though they are not generators on their own.
void check_zero_colsums(const Matrix& m, const std::string& label) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (std::abs(m.col(j).sum()) > kGeneratorTol)
      throw NonAdmissibleModel(label + ": column " + std::to_string(j) +
                               " sums to " + std::to_string(m.col(j).sum()));
}

}  // namespace

std::vector<Vector> box_vertices(const Vector& lo, const Vector& hi) {
  const int p = static_cast<int>(lo.size());
  std::vector<Vector> out;
  out.reserve(std::size_t{1} << p);
  for (std::size_t mask = 0; mask < (std::size_t{1} << p); ++mask) {
    Vector v(p);
    for (int j = 0; j < p; ++j) v[j] = (mask >> j & 1) ? hi[j] : lo[j];
    out.push_back(std::move(v));
  }
  return out;
}

void validate_model(const CascadeModel& model) {
  const int r = model.r, n = model.n, p = model.p;
  require(r > 0 && n > 0 && p >= 0, "model: r, n must be positive and p >= 0");
  require(model.C.rows() == r && model.C.cols() == r, "model: C must be r x r");
  require(model.A0.rows() == n && model.A0.cols() == n, "model: A0 must be n x n");
  require(static_cast<int>(model.A.size()) == r, "model: need one A block per driver state");
  require(static_cast<int>(model.B.size()) == p, "model: need one B family per control");
  for (const auto& fam : model.B)
    require(static_cast<int>(fam.size()) == r, "model: each B family needs r blocks");
  require(model.lo.size() == p && model.hi.size() == p, "model: bounds must have p entries");
  for (int j = 0; j < p; ++j)
    if (!(model.lo[j] <= model.hi[j]))
      throw BoxViolation("model: bounds for control " + std::to_string(j) +
                         " have lo > hi");

  validate_generator(model.C, kGeneratorTol, "C");
  for (int z = 0; z < r; ++z) {
    require(model.A[z].rows() == n && model.A[z].cols() == n, "model: A block must be n x n");
    validate_generator(model.A0 + model.A[z], kGeneratorTol,
                       "A0 + A[" + std::to_string(z) + "]");
  }
  for (int j = 0; j < p; ++j)
    for (int z = 0; z < r; ++z) {
      require(model.B[j][z].rows() == n && model.B[j][z].cols() == n,
              "model: B block must be n x n");
      check_zero_colsums(model.B[j][z],
                         "B[" + std::to_string(j) + "][" + std::to_string(z) + "]");
    }

  const auto report = check_admissible(model);
  if (!report.ok) throw NonAdmissibleModel(report.detail);
}

AdmissibilityReport check_admissible(const CascadeModel& model) {
  // P(z, u) is affine in u, so nonnegative off-diagonals at every box vertex
  // imply nonnegativity on the whole box.
  const auto vertices = box_vertices(model.lo, model.hi);
  for (int z = 0; z < model.r; ++z)
    for (std::size_t v = 0; v < vertices.size(); ++v) {
      Matrix P = model.A0 + model.A[z];
      for (int j = 0; j < model.p; ++j) P += vertices[v][j] * model.B[j][z];
      for (int col = 0; col < model.n; ++col)
        for (int row = 0; row < model.n; ++row) {
          if (row == col) continue;
          if (P(row, col) < -kGeneratorTol)
            return {false,
                    "P(z, u) has negative rate " + std::to_string(P(row, col)) +
                        " at entry (" + std::to_string(row) + ", " +
                        std::to_string(col) + "), z = " + std::to_string(z) +
                        ", box vertex " + std::to_string(v)};
        }
    }
  return {};
}

Matrix assemble_generator(const CascadeModel& model, int z, const Vector& u) {
  if (z < 0 || z >= model.r)
    throw IndexOutOfRange("assemble_generator: z = " + std::to_string(z));
  if (u.size() != model.p)
    throw DimensionMismatch("assemble_generator: control has " +
                            std::to_string(u.size()) + " entries, expected " +
                            std::to_string(model.p));
  for (int j = 0; j < model.p; ++j)
    if (u[j] < model.lo[j] - 1e-12 || u[j] > model.hi[j] + 1e-12)
      throw ControlOutOfBounds("assemble_generator: u[" + std::to_string(j) +
                               "] = " + std::to_string(u[j]) + " outside [" +
                               std::to_string(model.lo[j]) + ", " +
                               std::to_string(model.hi[j]) + "]");
  Matrix P = model.A0 + model.A[z];
  for (int j = 0; j < model.p; ++j) P += u[j] * model.B[j][z];
  return P;
}

Policy constant_policy(Vector u) {
  Policy policy;
  policy.kind = Policy::Kind::Constant;
  policy.constant = std::move(u);
  return policy;
}

Policy closed_form_policy(std::function<Vector(double, int, int)> fn) {
  Policy policy;
  policy.kind = Policy::Kind::ClosedForm;
  policy.closed_form = std::move(fn);
  return policy;
}

Vector policy_eval(const Policy& policy, double t, int z, int x) {
  switch (policy.kind) {
    case Policy::Kind::Constant:
      return policy.constant;
    case Policy::Kind::ClosedForm:
      return policy.closed_form(t, z, x);
    case Policy::Kind::Tabulated: {
      if (policy.grid.empty()) throw EmptyInput("policy: empty grid");
      auto it = std::upper_bound(policy.grid.begin(), policy.grid.end(), t);
      const auto idx = std::max<std::ptrdiff_t>(0, (it - policy.grid.begin()) - 1);
      const auto& slabs = policy.table[static_cast<std::size_t>(idx)];
      Vector u(static_cast<Eigen::Index>(slabs.size()));
      for (std::size_t j = 0; j < slabs.size(); ++j) u[static_cast<Eigen::Index>(j)] = slabs[j](x, z);
      return u;
    }
  }
  throw BadKind("policy: unknown kind");
}

Vector policy_eval_clamped(const Policy& policy, double t, int z, int x,
                           const Vector& lo, const Vector& hi,
                           long long* violations) {
  Vector u = policy_eval(policy, t, z, x);
  if (u.size() != lo.size())
    throw DimensionMismatch("policy returned " + std::to_string(u.size()) +
                            " controls, expected " + std::to_string(lo.size()));
  bool clipped = false;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double c = std::min(hi[j], std::max(lo[j], u[j]));
    if (std::abs(c - u[j]) > 1e-12) clipped = true;
    u[j] = c;
  }
  if (clipped && violations) ++*violations;
  return u;
}

Generator lift_to_joint(const CascadeModel& model, const Policy& policy,
                        double t) {
  const int r = model.r, n = model.n;
  Matrix P = kron(model.C, Matrix::Identity(n, n));
  long long ignored = 0;
  for (int z = 0; z < r; ++z)
    for (int x = 0; x < n; ++x) {
      const Vector u =
          policy_eval_clamped(policy, t, z, x, model.lo, model.hi, &ignored);
      Matrix col = model.A0.col(x) + model.A[z].col(x);
      for (int j = 0; j < model.p; ++j) col += u[j] * model.B[j][z].col(x);
      // Column s = z * n + x of the joint generator gets the x-part evaluated
      // at the control chosen in that very state.
      for (int xt = 0; xt < n; ++xt) P(z * n + xt, z * n + x) += col(xt, 0);
    }
  return make_generator(std::move(P), 1e-9, "lift_to_joint");
}

TriangularForm triangular_form(const CascadeModel& model) {
  TriangularForm form;
  int column = -1;
  auto scan = [&](const Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m.col(j).cwiseAbs().maxCoeff() == 0.0) continue;
      if (column == -1) column = static_cast<int>(j);
      else if (column != static_cast<int>(j)) return false;
    }
    return true;
  };
  for (const auto& a : model.A)
    if (!scan(a)) return form;
  for (const auto& fam : model.B)
    for (const auto& b : fam)
      if (!scan(b)) return form;

  form.valid = true;
  form.column = column;
  const int col = column < 0 ? 0 : column;
  form.a_col.reserve(model.A.size());
  for (const auto& a : model.A) form.a_col.push_back(a.col(col));
  form.b_col.resize(model.B.size());
  for (std::size_t j = 0; j < model.B.size(); ++j)
    for (const auto& b : model.B[j]) form.b_col[j].push_back(b.col(col));
  return form;
}

const char* to_string(DiagSufficiency s) {
  switch (s) {
    case DiagSufficiency::HoldsByC1: return "HoldsByC1";
    case DiagSufficiency::HoldsByC2: return "HoldsByC2";
    case DiagSufficiency::Unknown: return "Unknown";
  }
  return "?";
}

DiagSufficiency diagonalizable_sufficient(const CascadeModel& model,
                                          bool feedback_on_z) {
  auto same = [](const std::vector<Matrix>& blocks) {
    for (std::size_t i = 1; i < blocks.size(); ++i)
      if ((blocks[i] - blocks[0]).cwiseAbs().maxCoeff() > kGeneratorTol)
        return false;
    return true;
  };
  const bool a_same = same(model.A);
  bool b_same = true, b_zero = true;
  for (const auto& fam : model.B) {
    if (!same(fam)) b_same = false;
    for (const auto& b : fam)
      if (b.cwiseAbs().maxCoeff() > kGeneratorTol) b_zero = false;
  }
  if (a_same && b_same && !feedback_on_z) return DiagSufficiency::HoldsByC1;
  if (a_same && (feedback_on_z ? b_zero : b_same)) return DiagSufficiency::HoldsByC2;
  return DiagSufficiency::Unknown;
}

Matrix CostSpec::running(double t) const {
  Matrix base = L_t ? L_t(t) : L;
  if (alpha != 0.0) base *= std::exp(-alpha * t);
  return base;
}

Matrix CostSpec::terminal(double T) const {
  return alpha == 0.0 ? Phi : Matrix(std::exp(-alpha * T) * Phi);
}

double CostSpec::psi_value(const Vector& u) const {
  switch (psi) {
    case Psi::Zero: return 0.0;
    case Psi::Quadratic: return u.squaredNorm();
    case Psi::Custom:
      if (!psi_fn) throw BadKind("cost: Custom psi without a callback");
      return psi_fn(u);
  }
  throw BadKind("cost: unknown psi kind");
}

CostSpec zero_cost(int r, int n) {
  CostSpec cost;
  cost.L = Matrix::Zero(n, r);
  cost.Phi = Matrix::Zero(n, r);
  return cost;
}

ControlMin minimize_control_term(const Vector& s, const CostSpec& cost,
                                 const Vector& lo, const Vector& hi) {
  const int p = static_cast<int>(s.size());
  ControlMin best;
  best.u = Vector::Zero(p);

  switch (cost.psi) {
    case CostSpec::Psi::Zero: {
      for (int j = 0; j < p; ++j) {
        if (s[j] > 0.0) best.u[j] = lo[j];
        else if (s[j] < 0.0) best.u[j] = hi[j];
        else best.u[j] = 0.5 * (lo[j] + hi[j]);
        best.value += best.u[j] * s[j];
      }
      return best;
    }
    case CostSpec::Psi::Quadratic: {
      // Coordinates separate; the clamped stationary point is exact.
      for (int j = 0; j < p; ++j) {
        const double u = std::min(hi[j], std::max(lo[j], -0.5 * s[j]));
        best.u[j] = u;
        best.value += u * s[j] + u * u;
      }
      return best;
    }
    case CostSpec::Psi::Custom: {
      if (p > 2)
        throw CustomPsiDimension("Custom psi minimization supports p <= 2, got " +
                                 std::to_string(p));
      if (!cost.psi_fn) throw BadKind("cost: Custom psi without a callback");
      const int g = std::max(2, cost.custom_grid_points);
      auto coord = [&](int j, int k) {
        return lo[j] == hi[j] ? lo[j]
                              : lo[j] + (hi[j] - lo[j]) * k / double(g - 1);
      };
      best.value = std::numeric_limits<double>::infinity();
      Vector u(p);
      if (p == 0) {
        best.value = cost.psi_fn(u);
        return best;
      }
      const int outer = (p == 2) ? g : 1;
      for (int k0 = 0; k0 < outer; ++k0) {
        if (p == 2) u[0] = coord(0, k0);
        for (int k1 = 0; k1 < g; ++k1) {
          u[p - 1] = coord(p - 1, k1);
          double val = cost.psi_fn(u);
          for (int j = 0; j < p; ++j) val += u[j] * s[j];
          if (val < best.value) {  // strict: lexicographically first grid point wins ties
            best.value = val;
            best.u = u;
          }
        }
      }
      return best;
    }
  }
  throw BadKind("cost: unknown psi kind");
}

double minimize_control_value(const Vector& s, const CostSpec& cost,
                              const Vector& lo, const Vector& hi) {
  const int p = static_cast<int>(s.size());
  switch (cost.psi) {
    case CostSpec::Psi::Zero: {
      double v = 0.0;
      for (int j = 0; j < p; ++j) v += std::min(lo[j] * s[j], hi[j] * s[j]);
      return v;
    }
    case CostSpec::Psi::Quadratic: {
      double v = 0.0;
      for (int j = 0; j < p; ++j) {
        const double u = std::min(hi[j], std::max(lo[j], -0.5 * s[j]));
        v += u * s[j] + u * u;
      }
      return v;
    }
    case CostSpec::Psi::Custom:
      return minimize_control_term(s, cost, lo, hi).value;
  }
  throw BadKind("cost: unknown psi kind");
}

}  // namespace cascade
