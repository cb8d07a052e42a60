#pragma once

#include <cstdint>
#include <string>

#include "cascade/model.hpp"

namespace cascade {

struct PathEvent {
  double time = 0.0;
  enum class Chain { Driver, Controlled } chain = Chain::Driver;
  int from = 0;
  int to = 0;
  Vector u;  // control in force when the event fired
};

struct SamplePath {
  uint64_t seed = 0;
  int z0 = 0, x0 = 0;
  double T = 0.0;
  std::vector<PathEvent> events;  // strictly increasing times
  long long clamped = 0;          // policy evaluations pulled back into the box

  // State just after time t. Throws TimeOutOfRange outside [0, T].
  int z_at(double t) const;
  int x_at(double t) const;
};

// Exact jump-chain simulation by thinning: proposals arrive at the uniform
// bound on the total exit rate (driver plus controlled chain over all box
// vertices) and are accepted against the rates in force at the proposal time.
// A bound of zero means the chain is frozen and the path has no events.
SamplePath simulate(const CascadeModel& model, const Policy& policy, int z0,
                    int x0, double T, uint64_t seed, uint64_t stream = 0);

struct EtaEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long long n_paths = 0;
  long long clamped = 0;
  std::vector<double> per_path;
};

// Monte Carlo estimate of the cost functional: running cost integrated in
// closed form over the constancy intervals of (state, policy), the control
// penalty per segment, and the discounted terminal cost. Paths use seed
// streams indexed by path number and reduce through a fixed pairwise tree, so
// the result does not depend on `threads`.
EtaEstimate estimate_eta(const CascadeModel& model, const Policy& policy,
                         const CostSpec& cost, int z0, int x0, double T,
                         long long n_paths, uint64_t seed, int threads = 1);

// Value decomposition along one path under the valuation table V (n x r):
// v = V(x, z), s accumulates value jumps at controlled-chain events (trading),
// w = v - s collects the driver-driven part. Rows cover t = 0, every event,
// and t = T.
struct PortfolioSeries {
  std::vector<double> t, v, s, w;
};

PortfolioSeries portfolio_series(const SamplePath& path, const Matrix& V);

// Empirical joint law at time t across paths (state z * n + x). Requires at
// least one path and t within every path horizon.
ProbabilityVector occupancy(const std::vector<SamplePath>& paths, double t,
                            int r, int n);

// Text round-trip: a header line (seed, z0, x0, T) and one row per event.
// Doubles print with 17 significant digits, so parse is exact.
std::string serialize_path(const SamplePath& path);
SamplePath parse_path(const std::string& text);

}  // namespace cascade
