#include "cascade/zoo.hpp"

namespace cascade {

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  const int nr = static_cast<int>(rows.size());
  const int nc = static_cast<int>(rows.begin()->size());
  Matrix m(nr, nc);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

CostSpec terminal_value_cost(const Matrix& V, int r, int n) {
  CostSpec cost = zero_cost(r, n);
  cost.Phi = -V;  // minimize -E V(T): maximize terminal value
  return cost;
}

CostSpec unfed_time_cost(int r, int n) {
  CostSpec cost = zero_cost(r, n);
  cost.L.row(n - 1).setOnes();  // expected time spent unfed
  return cost;
}

}  // namespace

Generator default_price_generator(int r, PriceKind kind, double rate) {
  if (r <= 0) throw DimensionMismatch("default_price_generator: r must be positive");
  if (rate < 0.0) throw NegativeRate("default_price_generator: negative rate");
  switch (kind) {
    case PriceKind::Uniform: {
      if (r == 1) return make_generator(Matrix::Zero(1, 1));
      Matrix C = Matrix::Constant(r, r, rate / (r - 1));
      for (int i = 0; i < r; ++i) C(i, i) = -rate;
      return make_generator(std::move(C));
    }
    case PriceKind::BiasedUp: {
      if (r != 2)
        throw BadKind("default_price_generator: BiasedUp is defined for r = 2");
      Matrix C(2, 2);
      // Exit 1 -> 2 at 2/3 rate, 2 -> 1 at 4/3 rate: stationary (2/3, 1/3).
      C << -2.0 / 3.0 * rate, 4.0 / 3.0 * rate,
            2.0 / 3.0 * rate, -4.0 / 3.0 * rate;
      return make_generator(std::move(C));
    }
  }
  throw BadKind("default_price_generator: unknown kind");
}

Generator independent_price_generator(const Generator& c1, const Generator& c2) {
  const int r1 = c1.dim(), r2 = c2.dim();
  const Matrix C = kron(c1.m, Matrix::Identity(r2, r2)) +
                   kron(Matrix::Identity(r1, r1), c2.m);
  return make_generator(C);
}

ZooEntry bond_stock_sf(const Generator& C) {
  if (C.dim() != 2) throw DimensionMismatch("bond_stock_sf: C must be 2 x 2");
  ZooEntry e;
  e.name = "bond-stock";
  e.description = "bond and stock, three mixes, one trade control";
  auto& m = e.model;
  m.r = 2;
  m.n = 3;
  m.p = 1;
  m.C = C.m;
  m.A0 = Matrix::Zero(3, 3);
  m.A = {0.5 * mat({{0, 0, 0}, {0, -1, 1}, {0, 1, -1}}),
         0.5 * mat({{-1, 1, 0}, {1, -1, 0}, {0, 0, 0}})};
  m.B = {{mat({{0, 0, 0}, {0, -1, -1}, {0, 1, 1}}),
          mat({{-1, -1, 0}, {1, 1, 0}, {0, 0, 0}})}};
  m.lo = Vector::Constant(1, -0.5);
  m.hi = Vector::Constant(1, 0.5);
  e.V = mat({{2, -2.0 / 3.0}, {-2, -2.0 / 3.0}, {-2, 2.0 / 3.0}});
  e.self_financing = true;
  e.cost = terminal_value_cost(*e.V, m.r, m.n);
  validate_model(m);
  return e;
}

ZooEntry bond_stock_sf() {
  return bond_stock_sf(default_price_generator(2, PriceKind::Uniform, 0.5));
}

ZooEntry cats_dilemma(double f, double s, const Generator& C) {
  if (C.dim() != 3) throw DimensionMismatch("cats_dilemma: C must be 3 x 3");
  if (f < 0.0 || s < 0.0) throw NegativeRate("cats_dilemma: rates must be nonnegative");
  ZooEntry e;
  e.name = "cats-dilemma";
  e.description = "pair of foods offered by the driver, one preference control";
  auto& m = e.model;
  m.r = 3;
  m.n = 4;
  m.p = 1;
  m.C = C.m;
  m.A0 = mat({{-s, 0, 0, 0}, {0, -s, 0, 0}, {0, 0, -s, 0}, {s, s, s, 0}});
  // Driver state z offers the pair without food z; feeding leaves Unfed at
  // rate f, split across the pair, and the control tilts the split toward the
  // cyclically favored food.
  auto feed = [&](int a, int b) {
    Matrix A = Matrix::Zero(4, 4);
    A(a, 3) = 0.5 * f;
    A(b, 3) = 0.5 * f;
    A(3, 3) = -f;
    return A;
  };
  auto tilt = [&](int toward, int away) {
    Matrix B = Matrix::Zero(4, 4);
    B(toward, 3) = f;
    B(away, 3) = -f;
    return B;
  };
  m.A = {feed(1, 2), feed(0, 2), feed(0, 1)};
  m.B = {{tilt(1, 2), tilt(2, 0), tilt(0, 1)}};
  m.lo = Vector::Constant(1, -0.5);
  m.hi = Vector::Constant(1, 0.5);
  e.cost = unfed_time_cost(m.r, m.n);
  validate_model(m);
  return e;
}

ZooEntry cats_dilemma() {
  return cats_dilemma(1.0, 1.0, default_price_generator(3, PriceKind::Uniform, 1.0));
}

ZooEntry binary_decision(int N, const Generator& C) {
  if (N < 2) throw DimensionMismatch("binary_decision: need N >= 2");
  const int r = N * (N - 1) / 2;
  if (C.dim() != r)
    throw DimensionMismatch("binary_decision: C must be " + std::to_string(r) +
                            " x " + std::to_string(r));
  if (N == 3) {
    ZooEntry e = cats_dilemma(1.0, 1.0, C);
    e.name = "binary-decision";
    e.description = "three assets via the food model";
    return e;
  }

  ZooEntry e;
  e.name = "binary-decision";
  e.description = std::to_string(N) + " assets, driver state per pair";
  auto& m = e.model;
  m.r = r;
  m.n = N + 1;
  m.p = 1;
  m.C = C.m;
  m.A0 = Matrix::Zero(m.n, m.n);
  for (int i = 0; i < N; ++i) {
    m.A0(i, i) = -1.0;
    m.A0(N, i) = 1.0;
  }
  m.A.clear();
  m.B.resize(1);
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      Matrix A = Matrix::Zero(m.n, m.n);
      A(i, m.n - 1) = 0.5;
      A(j, m.n - 1) = 0.5;
      A(m.n - 1, m.n - 1) = -1.0;
      m.A.push_back(std::move(A));
      Matrix B = Matrix::Zero(m.n, m.n);
      B(i, m.n - 1) = 1.0;  // positive control favors the smaller index
      B(j, m.n - 1) = -1.0;
      m.B[0].push_back(std::move(B));
    }
  m.lo = Vector::Constant(1, -0.5);
  m.hi = Vector::Constant(1, 0.5);
  e.cost = unfed_time_cost(m.r, m.n);
  validate_model(m);
  return e;
}

ZooEntry binary_decision(int N) {
  const int r = std::max(1, N * (N - 1) / 2);
  return binary_decision(N, default_price_generator(r, PriceKind::Uniform, 1.0));
}

ZooEntry two_stock_sf(const Generator& C) {
  if (C.dim() != 4) throw DimensionMismatch("two_stock_sf: C must be 4 x 4");
  ZooEntry e;
  e.name = "two-stock";
  e.description = "two stocks, three mixes, two trade controls";
  auto& m = e.model;
  m.r = 4;
  m.n = 3;
  m.p = 2;
  m.C = C.m;
  m.A0 = Matrix::Zero(3, 3);
  const Matrix A_both = 0.5 * mat({{-1, 1, 0}, {1, -2, 1}, {0, 1, -1}});
  m.A = {A_both,
         0.5 * mat({{-1, 1, 0}, {1, -1, 0}, {0, 0, 0}}),
         0.5 * mat({{0, 0, 0}, {0, -1, 1}, {0, 1, -1}}),
         A_both};
  const Matrix B_lo = mat({{0, 0, 0}, {0, -1, 0}, {0, 1, 0}});
  m.B = {{mat({{-1, 0, 0}, {1, -1, 0}, {0, 1, 0}}),
          mat({{-1, 0, 0}, {1, 0, 0}, {0, 0, 0}}),
          B_lo, B_lo},
         {mat({{0, 1, 0}, {0, -1, 1}, {0, 0, -1}}),
          mat({{0, 1, 0}, {0, -1, 0}, {0, 0, 0}}),
          mat({{0, 0, 0}, {0, 0, 1}, {0, 0, -1}}),
          mat({{0, 1, 0}, {0, -1, 1}, {0, 0, -1}})}};
  m.lo = Vector::Constant(2, -0.5);
  m.hi = Vector::Constant(2, 0.5);
  e.V = mat({{-2, 2, 0, 2}, {-2, 2, -2, 2}, {-2, 0, -2, 2}});
  e.self_financing = true;
  e.cost = terminal_value_cost(*e.V, m.r, m.n);
  validate_model(m);
  return e;
}

ZooEntry two_stock_sf() {
  const Generator half = default_price_generator(2, PriceKind::Uniform, 0.5);
  return two_stock_sf(independent_price_generator(half, half));
}

ZooEntry invest_consume(const Generator& C) {
  if (C.dim() != 4) throw DimensionMismatch("invest_consume: C must be 4 x 4");
  ZooEntry e;
  e.name = "invest-consume";
  e.description = "wealth ladder with investment and consumption controls";
  auto& m = e.model;
  m.r = 4;
  m.n = 3;
  m.p = 2;
  m.C = C.m;
  m.A0 = mat({{-0.5, 0.5, 0}, {0.5, -1, 0.5}, {0, 0.5, -0.5}});
  m.A.assign(4, Matrix::Zero(3, 3));
  const Matrix B = mat({{-1, 0, 0}, {1, -1, 0}, {0, 1, 0}});
  const Matrix D = mat({{0, 1, 0}, {0, -1, 1}, {0, 0, -1}});
  m.B = {{B, B, B, B}, {D, D, D, D}};
  m.lo = Vector::Constant(2, -0.5);
  m.hi = Vector::Constant(2, 0.5);
  e.V = mat({{-2, 2, -2, 2}, {-2, 0, 0, 2}, {-2, 2, 2, 2}});
  e.self_financing = false;
  // Minimum-investment objective: pay for driver moves of the valuation,
  // collect the valuation at the horizon.
  CostSpec cost = zero_cost(m.r, m.n);
  cost.L = -(*e.V) * m.C;
  cost.Phi = *e.V;
  e.cost = cost;
  validate_model(m);
  return e;
}

ZooEntry invest_consume() {
  return invest_consume(default_price_generator(4, PriceKind::Uniform, 0.5));
}

ZooEntry ring_benchmark(int r, int n) {
  if (r < 1 || n < 2) throw DimensionMismatch("ring_benchmark: need r >= 1, n >= 2");
  ZooEntry e;
  e.name = "ring-benchmark";
  e.description = "cycle of " + std::to_string(n) + " states, " +
                  std::to_string(r) + " driver states";
  auto& m = e.model;
  m.r = r;
  m.n = n;
  m.p = 1;
  m.C = default_price_generator(r, PriceKind::Uniform, 0.5).m;
  m.A0 = Matrix::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    m.A0((x + 1) % n, x) += 0.5;
    m.A0((x + n - 1) % n, x) += 0.5;
    m.A0(x, x) -= 1.0;
  }
  m.A.resize(static_cast<std::size_t>(r));
  m.B.resize(1);
  m.B[0].resize(static_cast<std::size_t>(r));
  for (int z = 0; z < r; ++z) {
    const double drift = static_cast<double>(z + 1) / (2.0 * r);
    Matrix A = Matrix::Zero(n, n);
    for (int x = 0; x < n; ++x) {
      A((x + 1) % n, x) += drift;
      A(x, x) -= drift;
    }
    m.A[static_cast<std::size_t>(z)] = std::move(A);
    Matrix B = Matrix::Zero(n, n);
    const int src = z % n;
    B((src + 1) % n, src) = 1.0;
    B(src, src) = -1.0;
    m.B[0][static_cast<std::size_t>(z)] = std::move(B);
  }
  m.lo = Vector::Constant(1, -0.25);
  m.hi = Vector::Constant(1, 0.25);
  CostSpec cost = zero_cost(r, n);
  for (int z = 0; z < r; ++z) cost.L(z % n, z) = 1.0;
  e.cost = cost;
  validate_model(m);
  return e;
}

std::vector<std::string> zoo_names() {
  return {"bond-stock", "cats-dilemma", "binary-decision", "two-stock",
          "invest-consume", "ring-benchmark"};
}

ZooEntry zoo_by_name(const std::string& name, int N) {
  if (name == "bond-stock") return bond_stock_sf();
  if (name == "cats-dilemma") return cats_dilemma();
  if (name == "binary-decision") return binary_decision(N);
  if (name == "two-stock") return two_stock_sf();
  if (name == "invest-consume") return invest_consume();
  if (name == "ring-benchmark") return ring_benchmark(4, 4);
  throw BadKind("zoo: unknown model '" + name + "'");
}

}  // namespace cascade
