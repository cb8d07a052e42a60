#include "cascade/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <sstream>

#include "cascade/rng.hpp"

namespace cascade {

namespace {

int state_at(const SamplePath& path, double t, PathEvent::Chain chain,
             int start) {
  if (t < 0.0 || t > path.T)
    throw TimeOutOfRange("path query at t = " + std::to_string(t) +
                         " outside [0, " + std::to_string(path.T) + "]");
  int s = start;
  for (const auto& e : path.events) {
    if (e.time > t) break;
    if (e.chain == chain) s = e.to;
  }
  return s;
}

// Uniform bound on the total exit rate. The controlled rates are affine in u,
// so the box maximum sits at a vertex.
double thinning_bound(const CascadeModel& model) {
  double bound = 0.0;
  const auto vertices = box_vertices(model.lo, model.hi);
  for (int z = 0; z < model.r; ++z) {
    double mx = 0.0;
    for (const auto& u : vertices) {
      Matrix P = model.A0 + model.A[z];
      for (int j = 0; j < model.p; ++j) P += u[j] * model.B[j][z];
      for (int x = 0; x < model.n; ++x) mx = std::max(mx, -P(x, x));
    }
    bound = std::max(bound, -model.C(z, z) + mx);
  }
  return bound;
}

double pairwise_sum(const double* v, std::size_t count) {
  if (count == 0) return 0.0;
  if (count == 1) return v[0];
  if (count == 2) return v[0] + v[1];
  const std::size_t half = count / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, count - half);
}

void append_double(std::string& out, double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

}  // namespace

int SamplePath::z_at(double t) const {
  return state_at(*this, t, PathEvent::Chain::Driver, z0);
}

int SamplePath::x_at(double t) const {
  return state_at(*this, t, PathEvent::Chain::Controlled, x0);
}

SamplePath simulate(const CascadeModel& model, const Policy& policy, int z0,
                    int x0, double T, uint64_t seed, uint64_t stream) {
  if (z0 < 0 || z0 >= model.r)
    throw IndexOutOfRange("simulate: z0 = " + std::to_string(z0));
  if (x0 < 0 || x0 >= model.n)
    throw IndexOutOfRange("simulate: x0 = " + std::to_string(x0));
  if (T < 0.0) throw TimeOutOfRange("simulate: T must be nonnegative");

  SamplePath path;
  path.seed = seed;
  path.z0 = z0;
  path.x0 = x0;
  path.T = T;

  const double bound = thinning_bound(model);
  if (bound <= 0.0) return path;

  Rng rng(seed, stream);
  int z = z0, x = x0;
  double t = 0.0;
  Vector colx(model.n);
  while (true) {
    double wait;
    do {
      wait = rng.exponential(bound);
    } while (wait == 0.0);  // keep event times strictly increasing
    t += wait;
    if (t > T) break;

    const Vector u = policy_eval_clamped(policy, t, z, x, model.lo, model.hi,
                                         &path.clamped);
    const double rate_z = -model.C(z, z);
    colx = model.A0.col(x) + model.A[z].col(x);
    for (int j = 0; j < model.p; ++j) colx += u[j] * model.B[j][z].col(x);
    const double rate_x = -colx[x];

    // One uniform draw decides which chain fires (if any) and the target:
    // conditioned on landing in a band, the draw is uniform on that band.
    const double v = rng.uniform() * bound;
    if (v < rate_z) {
      double cum = 0.0;
      for (int i = 0; i < model.r; ++i) {
        if (i == z) continue;
        cum += std::max(0.0, model.C(i, z));
        if (v < cum) {
          path.events.push_back({t, PathEvent::Chain::Driver, z, i, u});
          z = i;
          break;
        }
      }
    } else if (v < rate_z + rate_x) {
      double cum = rate_z;
      for (int i = 0; i < model.n; ++i) {
        if (i == x) continue;
        cum += std::max(0.0, colx[i]);
        if (v < cum) {
          path.events.push_back({t, PathEvent::Chain::Controlled, x, i, u});
          x = i;
          break;
        }
      }
    }
    // else: proposal rejected, no event
  }
  return path;
}

namespace {

double path_cost(const CascadeModel& model, const Policy& policy,
                 const CostSpec& cost, const SamplePath& path) {
  const double T = path.T;

  // Breakpoints where either the state or a tabulated policy value changes.
  std::vector<double> cuts;
  cuts.push_back(0.0);
  for (const auto& e : path.events) cuts.push_back(e.time);
  if (policy.kind == Policy::Kind::Tabulated)
    for (double g : policy.grid)
      if (g > 0.0 && g < T) cuts.push_back(g);
  cuts.push_back(T);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  long long ignored = 0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    if (b - a <= 0.0) continue;
    const int z = path.z_at(a), x = path.x_at(a);

    if (cost.L_t) {
      // Simpson on the discounted running cost; panels sized about 1e-3.
      const int panels = std::max(2, 2 * static_cast<int>(std::ceil((b - a) / 2e-3)));
      const double h = (b - a) / panels;
      double acc = cost.running(a)(x, z) + cost.running(b)(x, z);
      for (int k = 1; k < panels; ++k)
        acc += (k % 2 ? 4.0 : 2.0) * cost.running(a + k * h)(x, z);
      total += acc * h / 3.0;
    } else {
      const double weight =
          cost.alpha == 0.0
              ? (b - a)
              : (std::exp(-cost.alpha * a) - std::exp(-cost.alpha * b)) / cost.alpha;
      total += cost.L(x, z) * weight;
    }

    // The control penalty is not discounted. Policies are sampled at the left
    // endpoint, which is exact for constant and tabulated feedback.
    const Vector u = policy_eval_clamped(policy, a, z, x, model.lo, model.hi,
                                         &ignored);
    total += cost.psi_value(u) * (b - a);
  }

  total += cost.terminal(T)(path.x_at(T), path.z_at(T));
  return total;
}

}  // namespace

EtaEstimate estimate_eta(const CascadeModel& model, const Policy& policy,
                         const CostSpec& cost, int z0, int x0, double T,
                         long long n_paths, uint64_t seed, int threads) {
  if (n_paths <= 0) throw EmptyInput("estimate_eta: n_paths must be positive");
  EtaEstimate est;
  est.n_paths = n_paths;
  est.per_path.resize(static_cast<std::size_t>(n_paths));
  std::vector<long long> clamps(static_cast<std::size_t>(n_paths), 0);

  auto run_chunk = [&](long long begin, long long end) {
    for (long long i = begin; i < end; ++i) {
      const SamplePath path = simulate(model, policy, z0, x0, T, seed,
                                       static_cast<uint64_t>(i));
      est.per_path[static_cast<std::size_t>(i)] = path_cost(model, policy, cost, path);
      clamps[static_cast<std::size_t>(i)] = path.clamped;
    }
  };

  threads = std::max(1, threads);
  if (threads == 1) {
    run_chunk(0, n_paths);
  } else {
    std::vector<std::future<void>> futures;
    const long long chunk = (n_paths + threads - 1) / threads;
    for (long long begin = 0; begin < n_paths; begin += chunk)
      futures.push_back(std::async(std::launch::async, run_chunk, begin,
                                   std::min(n_paths, begin + chunk)));
    for (auto& f : futures) f.get();
  }

  // Pairwise reductions in path order: identical totals for any thread count.
  est.mean = pairwise_sum(est.per_path.data(), est.per_path.size()) /
             static_cast<double>(n_paths);
  if (n_paths > 1) {
    std::vector<double> sq(est.per_path.size());
    for (std::size_t i = 0; i < sq.size(); ++i) {
      const double d = est.per_path[i] - est.mean;
      sq[i] = d * d;
    }
    const double var = pairwise_sum(sq.data(), sq.size()) /
                       static_cast<double>(n_paths - 1);
    est.std_error = std::sqrt(var / static_cast<double>(n_paths));
  }
  for (long long c : clamps) est.clamped += c;
  return est;
}

PortfolioSeries portfolio_series(const SamplePath& path, const Matrix& V) {
  PortfolioSeries out;
  int z = path.z0, x = path.x0;
  if (x >= V.rows() || z >= V.cols())
    throw DimensionMismatch("portfolio_series: V is smaller than the state space");
  double v = V(x, z);
  double s = 0.0;
  out.t.push_back(0.0);
  out.v.push_back(v);
  out.s.push_back(s);
  out.w.push_back(v - s);
  for (const auto& e : path.events) {
    if (e.chain == PathEvent::Chain::Controlled) x = e.to;
    else z = e.to;
    const double v_new = V(x, z);
    if (e.chain == PathEvent::Chain::Controlled) s += v_new - v;
    v = v_new;
    out.t.push_back(e.time);
    out.v.push_back(v);
    out.s.push_back(s);
    out.w.push_back(v - s);
  }
  out.t.push_back(path.T);
  out.v.push_back(v);
  out.s.push_back(s);
  out.w.push_back(v - s);
  return out;
}

ProbabilityVector occupancy(const std::vector<SamplePath>& paths, double t,
                            int r, int n) {
  if (paths.empty()) throw EmptyInput("occupancy: no paths");
  for (const auto& path : paths)
    if (t > path.T)
      throw TimeOutOfRange("occupancy: t = " + std::to_string(t) +
                           " beyond a path horizon " + std::to_string(path.T));
  Vector counts = Vector::Zero(r * n);
  for (const auto& path : paths) {
    const int z = path.z_at(t), x = path.x_at(t);
    if (z >= r || x >= n)
      throw IndexOutOfRange("occupancy: path state outside the r x n space");
    counts[z * n + x] += 1.0;
  }
  return make_probability(counts / static_cast<double>(paths.size()));
}

std::string serialize_path(const SamplePath& path) {
  std::string out;
  out += "seed,z0,x0,T\n";
  out += std::to_string(path.seed) + "," + std::to_string(path.z0) + "," +
         std::to_string(path.x0) + ",";
  append_double(out, path.T);
  out += "\n";
  const int p = path.events.empty() ? 0 : static_cast<int>(path.events.front().u.size());
  out += "time,chain,from,to";
  for (int j = 0; j < p; ++j) out += ",u" + std::to_string(j);
  out += "\n";
  for (const auto& e : path.events) {
    append_double(out, e.time);
    out += e.chain == PathEvent::Chain::Driver ? ",z," : ",x,";
    out += std::to_string(e.from) + "," + std::to_string(e.to);
    for (Eigen::Index j = 0; j < e.u.size(); ++j) {
      out += ",";
      append_double(out, e.u[j]);
    }
    out += "\n";
  }
  return out;
}

SamplePath parse_path(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line))
      throw ParseError(std::string("path: missing ") + what, 0, 0);
    return line;
  };
  auto split = [](const std::string& row) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : row) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    fields.push_back(cur);
    return fields;
  };

  int lineno = 0;
  auto to_double = [&](const std::string& tok) {
    try {
      std::size_t used = 0;
      const double x = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return x;
    } catch (const std::exception&) {
      throw ParseError("path: bad number '" + tok + "'", lineno, 1);
    }
  };
  auto to_ll = [&](const std::string& tok) {
    try {
      return std::stoll(tok);
    } catch (const std::exception&) {
      throw ParseError("path: bad integer '" + tok + "'", lineno, 1);
    }
  };

  next_line("header");
  lineno = 2;
  const auto head = split(next_line("header values"));
  if (head.size() != 4) throw ParseError("path: header needs seed,z0,x0,T", 2, 1);
  SamplePath path;
  try {
    path.seed = std::stoull(head[0]);
  } catch (const std::exception&) {
    throw ParseError("path: bad seed '" + head[0] + "'", 2, 1);
  }
  path.z0 = static_cast<int>(to_ll(head[1]));
  path.x0 = static_cast<int>(to_ll(head[2]));
  path.T = to_double(head[3]);
  next_line("column header");
  lineno = 3;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() < 4) throw ParseError("path: short event row", lineno, 1);
    PathEvent e;
    e.time = to_double(f[0]);
    if (f[1] == "z") e.chain = PathEvent::Chain::Driver;
    else if (f[1] == "x") e.chain = PathEvent::Chain::Controlled;
    else throw ParseError("path: chain must be z or x", lineno, 1);
    e.from = static_cast<int>(to_ll(f[2]));
    e.to = static_cast<int>(to_ll(f[3]));
    e.u.resize(static_cast<Eigen::Index>(f.size() - 4));
    for (std::size_t j = 4; j < f.size(); ++j)
      e.u[static_cast<Eigen::Index>(j - 4)] = to_double(f[j]);
    path.events.push_back(std::move(e));
  }
  return path;
}

}  // namespace cascade
