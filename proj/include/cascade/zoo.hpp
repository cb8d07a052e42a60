#pragma once

#include "cascade/model.hpp"

namespace cascade {

// A model plus its bookkeeping: the valuation table V (when the states encode
// a portfolio), whether trades conserve value, and a default cost so the CLI
// can solve the model as shipped.
struct ZooEntry {
  std::string name;
  std::string description;
  CascadeModel model;
  std::optional<Matrix> V;  // n x r
  bool self_financing = false;
  std::optional<CostSpec> cost;
};

enum class PriceKind { Uniform, BiasedUp };

// Uniform: every off-diagonal rate is rate / (r - 1). BiasedUp (r = 2 only):
// exit rates 2/3 and 4/3 of `rate`, stationary law (2/3, 1/3) with the first
// state favored.
Generator default_price_generator(int r, PriceKind kind, double rate);

// Driver for two independent price chains, first factor slow index.
Generator independent_price_generator(const Generator& c1, const Generator& c2);

// One bond and one stock, three rebalancing states, one trade control. The
// stock price z flips between (1, 1) and (1, -1/3); portfolio values are
// conserved across every reachable trade.
ZooEntry bond_stock_sf(const Generator& C);
ZooEntry bond_stock_sf();

// Food allocation: driver picks which pair of foods is offered, the chain
// tracks what was eaten last (or Unfed). f is the feed rate, s the spoil
// rate; the control tilts the choice within the offered pair.
ZooEntry cats_dilemma(double f, double s, const Generator& C);
ZooEntry cats_dilemma();

// N interchangeable assets, driver state per unordered pair. N = 3 is the
// food model bit for bit; larger N uses pairs in lexicographic order with the
// positive control favoring the smaller element.
ZooEntry binary_decision(int N, const Generator& C);
ZooEntry binary_decision(int N);

// Two stocks, three portfolio mixes, two trade controls, driver = product of
// two independent price chains.
ZooEntry two_stock_sf(const Generator& C);
ZooEntry two_stock_sf();

// Wealth ladder with investment and consumption controls; trades do not
// conserve value (V jumps at controlled transitions).
ZooEntry invest_consume(const Generator& C);
ZooEntry invest_consume();

// Synthetic ring family used for scaling measurements: n states in a cycle,
// driver-dependent forward drift, one control pushing along one edge.
ZooEntry ring_benchmark(int r, int n);

// Registry used by the CLI. Known names: bond-stock, cats-dilemma,
// binary-decision, two-stock, invest-consume, ring-benchmark.
std::vector<std::string> zoo_names();
ZooEntry zoo_by_name(const std::string& name, int N = 3);

}  // namespace cascade
