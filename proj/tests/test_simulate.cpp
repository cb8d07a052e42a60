#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"

#include "cascade/simulate.hpp"
#include "cascade/zoo.hpp"

using namespace cascade;

namespace {

// Driver frozen, x flips between two states at unit rate: every proposal is
// accepted, so inter-event times are exactly Exp(1).
CascadeModel unit_flip() {
  CascadeModel m;
  m.r = 1;
  m.n = 2;
  m.p = 0;
  m.C = Matrix::Zero(1, 1);
  m.A0 = Matrix(2, 2);
  m.A0 << -1.0, 1.0, 1.0, -1.0;
  m.A = {Matrix::Zero(2, 2)};
  m.lo = Vector(0);
  m.hi = Vector(0);
  return m;
}

Policy no_control() { return constant_policy(Vector(0)); }

}  // namespace

TEST_CASE("simulate is deterministic in (seed, stream) and sensitive to both") {
  const auto cat = cats_dilemma();
  const auto pol = constant_policy(Vector::Constant(1, 0.25));
  const auto a = simulate(cat.model, pol, 0, 3, 5.0, 42, 0);
  const auto b = simulate(cat.model, pol, 0, 3, 5.0, 42, 0);
  CHECK(serialize_path(a) == serialize_path(b));

  const auto c = simulate(cat.model, pol, 0, 3, 5.0, 43, 0);
  const auto d = simulate(cat.model, pol, 0, 3, 5.0, 42, 1);
  CHECK(serialize_path(a) != serialize_path(c));
  CHECK(serialize_path(a) != serialize_path(d));
}

TEST_CASE("event times strictly increase and states chain correctly") {
  const auto cat = cats_dilemma();
  const auto pol = constant_policy(Vector::Constant(1, 0.5));
  const auto path = simulate(cat.model, pol, 1, 3, 20.0, 7);
  REQUIRE(!path.events.empty());
  int z = path.z0, x = path.x0;
  double last = 0.0;
  for (const auto& e : path.events) {
    CHECK(e.time > last);
    CHECK(e.time <= 20.0);
    last = e.time;
    if (e.chain == PathEvent::Chain::Driver) {
      CHECK(e.from == z);
      z = e.to;
    } else {
      CHECK(e.from == x);
      x = e.to;
    }
    CHECK(e.from != e.to);
  }
  CHECK(path.z_at(20.0) == z);
  CHECK(path.x_at(20.0) == x);
  CHECK(path.z_at(0.0) == path.z0);
  CHECK_THROWS_AS(path.z_at(20.5), TimeOutOfRange);
}

TEST_CASE("inter-event gaps of a unit-rate chain pass a KS check") {
  const auto m = unit_flip();
  const auto path = simulate(m, no_control(), 0, 0, 2000.0, 411);
  std::vector<double> gaps;
  double prev = 0.0;
  for (const auto& e : path.events) {
    gaps.push_back(e.time - prev);
    prev = e.time;
  }
  const auto N = static_cast<double>(gaps.size());
  REQUIRE(gaps.size() > 1500);
  std::sort(gaps.begin(), gaps.end());
  double D = 0.0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double F = 1.0 - std::exp(-gaps[i]);
    D = std::max(D, std::abs(F - (i + 1) / N));
    D = std::max(D, std::abs(F - i / N));
  }
  // 1% critical value of the one-sample Kolmogorov statistic.
  CHECK(D * std::sqrt(N) < 1.63);
  // Mean gap within 4 standard errors of 1.
  const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / N;
  CHECK(std::abs(mean - 1.0) < 4.0 / std::sqrt(N));
}

TEST_CASE("a frozen model yields an empty path") {
  CascadeModel m = unit_flip();
  m.A0.setZero();
  const auto path = simulate(m, no_control(), 0, 1, 10.0, 5);
  CHECK(path.events.empty());
  CHECK(path.x_at(10.0) == 1);
}

TEST_CASE("occupancy at a time point matches the joint law") {
  const auto cat = cats_dilemma();
  const auto pol = constant_policy(Vector::Constant(1, 0.0));
  const int n_paths = 8000;
  std::vector<SamplePath> paths;
  paths.reserve(n_paths);
  for (int i = 0; i < n_paths; ++i)
    paths.push_back(simulate(cat.model, pol, 0, 3, 1.0, 1000 + i));
  const auto emp = occupancy(paths, 1.0, 3, 4);

  const Generator joint = lift_to_joint(cat.model, pol, 0.0);
  const auto ref = propagate(joint, point_mass(0 * 4 + 3, 12), 0.0, 1.0, 1e-3);
  // Each coordinate is a binomial proportion; 0.025 is beyond four standard
  // errors at this sample size.
  CHECK((emp.v - ref.v).cwiseAbs().maxCoeff() < 0.025);

  CHECK_THROWS_AS(occupancy({}, 0.5, 3, 4), EmptyInput);
  CHECK_THROWS_AS(occupancy(paths, 1.5, 3, 4), TimeOutOfRange);
  CHECK_THROWS_AS(occupancy(paths, 0.5, 3, 2), IndexOutOfRange);
}

TEST_CASE("portfolio series: value jumps split into trading and price parts") {
  const auto bs = bond_stock_sf();
  const auto pol = constant_policy(Vector::Constant(1, 0.5));
  const auto path = simulate(bs.model, pol, 0, 0, 50.0, 9);
  REQUIRE(!path.events.empty());
  const auto series = portfolio_series(path, *bs.V);
  REQUIRE(series.t.size() == path.events.size() + 2);

  CHECK(series.v.front() == (*bs.V)(path.x0, path.z0));
  CHECK(series.s.front() == 0.0);
  bool saw_trade = false, saw_price = false;
  for (std::size_t i = 0; i < path.events.size(); ++i) {
    const auto& e = path.events[i];
    const double dv = series.v[i + 1] - series.v[i];
    const double ds = series.s[i + 1] - series.s[i];
    const double dw = series.w[i + 1] - series.w[i];
    CHECK(series.w[i + 1] ==
          doctest::Approx(series.v[i + 1] - series.s[i + 1]).epsilon(1e-15));
    if (e.chain == PathEvent::Chain::Controlled) {
      saw_trade = true;
      CHECK(ds == doctest::Approx(dv));  // trades book the whole jump
      CHECK(dw == doctest::Approx(0.0));
      // Self-financing model: the booked jump is exactly zero.
      CHECK(dv == 0.0);
    } else {
      saw_price = true;
      CHECK(ds == 0.0);  // price moves do not touch the trading account
    }
  }
  CHECK(saw_trade);
  CHECK(saw_price);
  // Nothing happens between the last event and the horizon.
  CHECK(series.v.back() == series.v[series.t.size() - 2]);
}

TEST_CASE("estimate_eta integrates a constant running cost exactly") {
  const auto m = unit_flip();
  CostSpec cost = zero_cost(1, 2);
  cost.L = Matrix::Ones(2, 1);
  const auto est = estimate_eta(m, no_control(), cost, 0, 0, 5.0, 64, 3);
  CHECK(est.mean == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(est.std_error < 1e-12);
  CHECK(est.n_paths == 64);
  REQUIRE(est.per_path.size() == 64);
}

TEST_CASE("estimate_eta matches the discounted closed form") {
  const auto m = unit_flip();
  CostSpec cost = zero_cost(1, 2);
  cost.L = Matrix::Ones(2, 1);
  cost.alpha = 0.7;
  const double T = 3.0;
  const auto est = estimate_eta(m, no_control(), cost, 0, 0, T, 32, 64);
  CHECK(est.mean ==
        doctest::Approx((1.0 - std::exp(-0.7 * T)) / 0.7).epsilon(1e-12));
  CHECK(est.std_error < 1e-12);
}

TEST_CASE("estimate_eta is reduction-order independent of threads") {
  const auto cat = cats_dilemma();
  CostSpec cost = *cat.cost;
  const auto pol = constant_policy(Vector::Constant(1, 0.3));
  const auto a = estimate_eta(cat.model, pol, cost, 0, 3, 2.0, 500, 17, 1);
  const auto b = estimate_eta(cat.model, pol, cost, 0, 3, 2.0, 500, 17, 4);
  CHECK(a.mean == b.mean);  // bitwise: fixed pairwise reduction tree
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("estimate_eta agrees with the propagated terminal law") {
  const auto cat = cats_dilemma();
  CostSpec cost = zero_cost(3, 4);
  cost.Phi.row(3).setOnes();  // indicator of ending unfed
  const auto pol = constant_policy(Vector::Constant(1, 0.2));
  const double T = 2.0;
  const auto est = estimate_eta(cat.model, pol, cost, 1, 0, T, 4000, 99, 4);

  const Generator joint = lift_to_joint(cat.model, pol, 0.0);
  const auto ref = propagate(joint, point_mass(1 * 4 + 0, 12), 0.0, T, 1e-3);
  double want = 0.0;
  for (int z = 0; z < 3; ++z) want += ref.v[z * 4 + 3];
  CHECK(std::abs(est.mean - want) < 3.5 * est.std_error);
}

TEST_CASE("estimate_eta counts clamped policy evaluations") {
  const auto cat = cats_dilemma();
  const auto wild = constant_policy(Vector::Constant(1, 3.0));
  const auto est = estimate_eta(cat.model, wild, *cat.cost, 0, 3, 1.0, 16, 5);
  CHECK(est.clamped > 0);

  const auto tame = constant_policy(Vector::Constant(1, 0.5));
  CHECK(estimate_eta(cat.model, tame, *cat.cost, 0, 3, 1.0, 16, 5).clamped == 0);
}

TEST_CASE("path serialization round-trips exactly") {
  const auto cat = cats_dilemma();
  const auto pol = constant_policy(Vector::Constant(1, 1.0 / 3.0));
  const auto path = simulate(cat.model, pol, 2, 3, 7.0, 123456789ull);
  const std::string text = serialize_path(path);
  const SamplePath back = parse_path(text);
  CHECK(back.seed == path.seed);
  CHECK(back.z0 == path.z0);
  CHECK(back.x0 == path.x0);
  CHECK(back.T == path.T);
  REQUIRE(back.events.size() == path.events.size());
  for (std::size_t i = 0; i < path.events.size(); ++i) {
    CHECK(back.events[i].time == path.events[i].time);
    CHECK(back.events[i].chain == path.events[i].chain);
    CHECK(back.events[i].from == path.events[i].from);
    CHECK(back.events[i].to == path.events[i].to);
    CHECK((back.events[i].u - path.events[i].u).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(serialize_path(back) == text);
}

TEST_CASE("parse_path reports malformed input with a location") {
  CHECK_THROWS_AS(parse_path("nonsense"), ParseError);
  CHECK_THROWS_AS(parse_path("seed,z0,x0,T\n1,0,0,abc\ntime,chain,from,to\n"),
                  ParseError);
  try {
    parse_path("seed,z0,x0,T\n1,0,0,5\ntime,chain,from,to\n0.5,q,0,1\n");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.line == 4);
  }
}
