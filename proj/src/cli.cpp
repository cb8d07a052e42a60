#include "cascade/cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cascade/bellman.hpp"
#include "cascade/model_io.hpp"
#include "cascade/simulate.hpp"
#include "cascade/singular.hpp"
#include "cascade/zoo.hpp"

namespace cascade {
namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  const auto dir = std::filesystem::path(path).parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out.good()) throw Error("write failed for '" + path + "'");
}

Vector parse_vector(const std::string& text, const std::string& what) {
  std::vector<double> vals;
  std::string tok;
  std::istringstream in(text);
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError(what + ": expected comma-separated numbers, got '" +
                           text + "'", 0, 0);
    }
  }
  if (vals.empty()) throw ParseError(what + ": empty number list", 0, 0);
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

// A model argument is either a file path or a zoo name.
ZooEntry load_entry(const std::string& spec) {
  {
    std::ifstream probe(spec);
    if (probe) return load_model_file(spec);
  }
  const auto names = zoo_names();
  if (std::find(names.begin(), names.end(), spec) != names.end())
    return zoo_by_name(spec);
  throw ParseError("'" + spec + "' is neither a readable file nor a zoo name",
                   0, 0);
}

struct CostFlags {
  std::string psi;  // empty = keep the model's own choice
  double alpha = 0.0;
  bool alpha_set = false;
  int psi_grid = 101;
};

// The `custom` kind routes a plain quadratic penalty through the grid-scan
// minimizer; it exists so the Custom code path is reachable from the CLI.
CostSpec resolve_cost(const ZooEntry& entry, const CostFlags& flags) {
  CostSpec cost = entry.cost ? *entry.cost
                             : zero_cost(entry.model.r, entry.model.n);
  if (flags.psi == "zero") {
    cost.psi = CostSpec::Psi::Zero;
  } else if (flags.psi == "quad") {
    cost.psi = CostSpec::Psi::Quadratic;
  } else if (flags.psi == "custom") {
    cost.psi = CostSpec::Psi::Custom;
    cost.psi_fn = [](const Vector& u) { return u.squaredNorm(); };
    cost.custom_grid_points = flags.psi_grid;
  }
  if (flags.alpha_set) cost.alpha = flags.alpha;
  return cost;
}

const char* psi_name(CostSpec::Psi psi) {
  switch (psi) {
    case CostSpec::Psi::Zero: return "zero";
    case CostSpec::Psi::Quadratic: return "quad";
    default: return "custom";
  }
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::string k_csv(const BellmanSolution& sol) {
  std::string s = "t";
  for (int z = 0; z < sol.model.r; ++z)
    for (int x = 0; x < sol.model.n; ++x)
      s += ",k[" + std::to_string(z) + "][" + std::to_string(x) + "]";
  s += "\n";
  for (std::size_t k = 0; k < sol.grid.size(); ++k) {
    s += fmt17(sol.grid[k]);
    for (int z = 0; z < sol.model.r; ++z)
      for (int x = 0; x < sol.model.n; ++x) s += "," + fmt17(sol.K[k](x, z));
    s += "\n";
  }
  return s;
}

std::string policy_csv(const BellmanSolution& sol, const Policy& pol) {
  const int r = sol.model.r, n = sol.model.n, p = sol.model.p;
  std::string s = "t";
  for (int z = 0; z < r; ++z)
    for (int x = 0; x < n; ++x)
      for (int j = 0; j < p; ++j)
        s += ",u[" + std::to_string(z) + "][" + std::to_string(x) + "][" +
             std::to_string(j) + "]";
  s += "\n";
  for (std::size_t k = 0; k < pol.grid.size(); ++k) {
    s += fmt17(pol.grid[k]);
    for (int z = 0; z < r; ++z)
      for (int x = 0; x < n; ++x)
        for (int j = 0; j < p; ++j)
          s += "," + fmt17(pol.table[k][static_cast<std::size_t>(j)](x, z));
    s += "\n";
  }
  return s;
}

std::string joint_csv(const JointBellmanSolution& jb) {
  std::string s = "t";
  for (int z = 0; z < jb.r; ++z)
    for (int x = 0; x < jb.n; ++x)
      s += ",k[" + std::to_string(z) + "][" + std::to_string(x) + "]";
  s += "\n";
  for (std::size_t k = 0; k < jb.grid.size(); ++k) {
    s += fmt17(jb.grid[k]);
    for (int i = 0; i < jb.r * jb.n; ++i) s += "," + fmt17(jb.k[k][i]);
    s += "\n";
  }
  return s;
}

std::vector<double> split_csv_row(const std::string& line, int lineno) {
  std::vector<double> vals;
  std::string tok;
  std::istringstream in(line);
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError("bad number '" + tok + "' in CSV row", lineno, 1);
    }
  }
  return vals;
}

Policy read_policy_csv(const std::string& path, const CascadeModel& model) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open policy file '" + path + "'", 0, 0);
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("policy file '" + path + "' is empty", 1, 1);
  const int want = 1 + model.r * model.n * model.p;
  Policy pol;
  pol.kind = Policy::Kind::Tabulated;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto vals = split_csv_row(line, lineno);
    if (static_cast<int>(vals.size()) != want)
      throw ParseError("policy row has " + std::to_string(vals.size()) +
                           " columns, expected " + std::to_string(want),
                       lineno, 1);
    if (!pol.grid.empty() && vals[0] <= pol.grid.back())
      throw ParseError("policy grid times must increase", lineno, 1);
    pol.grid.push_back(vals[0]);
    std::vector<Matrix> us(static_cast<std::size_t>(model.p),
                           Matrix(model.n, model.r));
    std::size_t idx = 1;
    for (int z = 0; z < model.r; ++z)
      for (int x = 0; x < model.n; ++x)
        for (int j = 0; j < model.p; ++j)
          us[static_cast<std::size_t>(j)](x, z) = vals[idx++];
    pol.table.push_back(std::move(us));
  }
  if (pol.grid.empty())
    throw ParseError("policy file '" + path + "' has no rows", lineno, 1);
  return pol;
}

// ---- solve ----

struct SolveOpts {
  std::string model_spec;
  double T = 5.0;
  double dt = 1e-3;
  std::string prefix = "out";
  CostFlags cost;
  bool partial = false;
  bool coupled = false;
  std::string diag;  // "", "c1", "weighted"
  std::string c_str;
  std::string pz0_str;
};

void run_solve(const SolveOpts& opts, std::ostream& out) {
  const ZooEntry entry = load_entry(opts.model_spec);
  const CascadeModel& model = entry.model;
  const CostSpec cost = resolve_cost(entry, opts.cost);

  const BellmanSolution sol = solve_bellman(model, cost, opts.T, opts.dt);
  write_file(opts.prefix + ".k.csv", k_csv(sol));
  out << "wrote " << opts.prefix << ".k.csv\n";
  const Policy pol = extract_policy(sol);
  write_file(opts.prefix + ".policy.csv", policy_csv(sol, pol));
  out << "wrote " << opts.prefix << ".policy.csv\n";

  json summary;
  summary["model"] = entry.name;
  summary["r"] = model.r;
  summary["n"] = model.n;
  summary["p"] = model.p;
  summary["T"] = opts.T;
  summary["dt"] = opts.dt;
  summary["psi"] = psi_name(cost.psi);
  summary["alpha"] = cost.alpha;
  json eta = json::array();
  for (int z = 0; z < model.r; ++z) {
    json row = json::array();
    for (int x = 0; x < model.n; ++x) row.push_back(optimal_value(sol, z, x));
    eta.push_back(row);
  }
  summary["eta_star"] = eta;

  if (opts.coupled) {
    const JointBellmanSolution jb =
        solve_coupled_baseline(model, cost, opts.T, opts.dt);
    write_file(opts.prefix + ".joint.csv", joint_csv(jb));
    out << "wrote " << opts.prefix << ".joint.csv\n";
    summary["identity_gap"] = identity_gap(sol, jb);
  }

  if (opts.partial) {
    const ProbabilityVector pz0 =
        opts.pz0_str.empty()
            ? uniform_probability(model.r)
            : make_probability(parse_vector(opts.pz0_str, "--pz0"));
    const PartialFeedbackSolution pf =
        solve_partial_feedback(model, cost, opts.T, opts.dt, pz0);
    std::string s = "t";
    for (int z = 0; z < model.r; ++z) s += ",pz[" + std::to_string(z) + "]";
    s += "\n";
    for (std::size_t k = 0; k < pf.sol.grid.size(); ++k) {
      s += fmt17(pf.sol.grid[k]);
      for (int z = 0; z < model.r; ++z) s += "," + fmt17(pf.pz[k][z]);
      s += "\n";
    }
    write_file(opts.prefix + ".pz.csv", s);
    out << "wrote " << opts.prefix << ".pz.csv\n";
    std::string u = "t";
    for (int x = 0; x < model.n; ++x)
      for (int j = 0; j < model.p; ++j)
        u += ",u[" + std::to_string(x) + "][" + std::to_string(j) + "]";
    u += "\n";
    for (std::size_t k = 0; k < pf.sol.grid.size(); ++k) {
      u += fmt17(pf.sol.grid[k]);
      for (int x = 0; x < model.n; ++x)
        for (int j = 0; j < model.p; ++j)
          u += "," + fmt17(pf.controls[k](x, j));
      u += "\n";
    }
    write_file(opts.prefix + ".partial_policy.csv", u);
    out << "wrote " << opts.prefix << ".partial_policy.csv\n";
    json pv = json::array();
    for (int x = 0; x < model.n; ++x) pv.push_back(pf.value(x));
    summary["partial_eta"] = pv;
    summary["pz0"] = vector_json(pz0.v);
  }

  if (!opts.diag.empty()) {
    const DiagMode mode =
        opts.diag == "c1" ? DiagMode::C1 : DiagMode::Cweighted;
    std::optional<ProbabilityVector> c;
    if (mode == DiagMode::Cweighted) {
      c = opts.c_str.empty()
              ? steady_state(make_generator(model.C, kGeneratorTol, "C"))
              : make_probability(parse_vector(opts.c_str, "--c"));
    }
    const DiagSolution ds =
        solve_diagonalizable(model, cost, opts.T, opts.dt, mode, c);
    std::string s = "t";
    for (int x = 0; x < model.n; ++x) s += ",k[" + std::to_string(x) + "]";
    s += "\n";
    for (std::size_t k = 0; k < ds.grid.size(); ++k) {
      s += fmt17(ds.grid[k]);
      for (int x = 0; x < model.n; ++x) s += "," + fmt17(ds.k[k][x]);
      s += "\n";
    }
    write_file(opts.prefix + ".kvec.csv", s);
    out << "wrote " << opts.prefix << ".kvec.csv\n";
    json dv = json::array();
    for (int x = 0; x < model.n; ++x) dv.push_back(ds.value(x));
    summary["diag_eta"] = dv;
    summary["diag_mode"] = opts.diag;
    if (c) summary["c"] = vector_json(c->v);
  }

  write_file(opts.prefix + ".summary.json", summary.dump(2) + "\n");
  out << "wrote " << opts.prefix << ".summary.json\n";
  out << "eta_star[0][0] = " << fmt17(optimal_value(sol, 0, 0)) << "\n";
}

// ---- simulate ----

struct SimOpts {
  std::string model_spec;
  double T = 5.0;
  uint64_t seed = 1;
  long long paths = 1;
  int z0 = 0;
  int x0 = 0;
  int threads = 1;
  std::string policy_prefix;
  std::string u_str;
  bool portfolio = false;
  std::string prefix = "out";
  CostFlags cost;
};

void run_simulate(const SimOpts& opts, std::ostream& out) {
  const ZooEntry entry = load_entry(opts.model_spec);
  const CascadeModel& model = entry.model;
  if (opts.paths < 1) throw InvalidStep("--paths must be at least 1");

  Policy pol;
  if (!opts.policy_prefix.empty()) {
    pol = read_policy_csv(opts.policy_prefix + ".policy.csv", model);
  } else if (!opts.u_str.empty()) {
    Vector u = parse_vector(opts.u_str, "--u");
    if (u.size() != model.p)
      throw DimensionMismatch("--u has " + std::to_string(u.size()) +
                              " entries, model has p = " +
                              std::to_string(model.p));
    pol = constant_policy(std::move(u));
  } else {
    pol = constant_policy(model.box_midpoint());
  }

  if (opts.paths == 1) {
    const SamplePath path =
        simulate(model, pol, opts.z0, opts.x0, opts.T, opts.seed);
    write_file(opts.prefix + ".path.txt", serialize_path(path));
    out << "wrote " << opts.prefix << ".path.txt (" << path.events.size()
        << " events)\n";
    if (opts.portfolio) {
      if (!entry.V)
        throw PreconditionNotMet("model '" + entry.name +
                                 "' has no valuation table");
      const PortfolioSeries ps = portfolio_series(path, *entry.V);
      std::string s = "t,v,s,w\n";
      for (std::size_t i = 0; i < ps.t.size(); ++i)
        s += fmt17(ps.t[i]) + "," + fmt17(ps.v[i]) + "," + fmt17(ps.s[i]) +
             "," + fmt17(ps.w[i]) + "\n";
      write_file(opts.prefix + ".portfolio.csv", s);
      out << "wrote " << opts.prefix << ".portfolio.csv\n";
    }
    return;
  }

  if (opts.portfolio)
    throw BadKind("--portfolio needs --paths 1; it is a per-path series");
  const CostSpec cost = resolve_cost(entry, opts.cost);
  const EtaEstimate est =
      estimate_eta(model, pol, cost, opts.z0, opts.x0, opts.T, opts.paths,
                   opts.seed, opts.threads);
  json j;
  j["mean"] = est.mean;
  j["std_error"] = est.std_error;
  j["n_paths"] = est.n_paths;
  j["clamped"] = est.clamped;
  j["seed"] = opts.seed;
  j["z0"] = opts.z0;
  j["x0"] = opts.x0;
  j["T"] = opts.T;
  write_file(opts.prefix + ".eta.json", j.dump(2) + "\n");
  out << "wrote " << opts.prefix << ".eta.json\n";
  out << "mean = " << fmt17(est.mean) << ", std_error = "
      << fmt17(est.std_error) << "\n";
}

// ---- qp ----

struct QpOpts {
  std::string c_str;
  double grid_step = 0.01;
  std::string out_path;
};

void run_qp(const QpOpts& opts, std::ostream& out) {
  const Vector c = parse_vector(opts.c_str, "--c");
  const QpProblem qp = build_qp(c);
  const QpSolution s = solve_box_qp(qp);
  const auto oracle = qp_oracle_grid(qp, opts.grid_step);
  json j;
  j["c"] = vector_json(c);
  j["u_star"] = vector_json(s.u0);
  j["eta_star"] = s.eta_star;
  j["class"] = to_string(s.cls);
  j["active"] = s.active;
  j["oracle_u"] = vector_json(oracle.first);
  j["oracle_eta"] = oracle.second;
  j["oracle_gap"] = std::abs(s.eta_star - oracle.second);
  const std::string text = j.dump(2) + "\n";
  out << text;
  if (!opts.out_path.empty()) write_file(opts.out_path, text);
}

// ---- sweep ----

struct SweepOpts {
  int resolution = 21;
  std::string out_path = "sweep.csv";
  int threads = 1;
};

void run_sweep(const SweepOpts& opts, std::ostream& out) {
  if (opts.resolution < 2)
    throw InvalidStep("--resolution must be at least 2");
  const int d = opts.resolution - 1;
  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j <= d - i; ++j) cells.emplace_back(i, j);

  std::vector<std::string> rows(cells.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const auto [i, j] = cells[idx];
      Vector c(3);
      c << static_cast<double>(i) / d, static_cast<double>(j) / d,
          static_cast<double>(d - i - j) / d;
      const QpProblem qp = build_qp(c);
      const QpSolution s = solve_box_qp(qp);
      std::string row = fmt17(c[0]) + "," + fmt17(c[1]) + "," + fmt17(c[2]);
      for (int t = 0; t < 3; ++t) row += "," + fmt17(s.u0[t]);
      row += "," + fmt17(s.eta_star) + "," + to_string(s.cls);
      rows[idx] = std::move(row);
    }
  };
  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    work(0, cells.size());
  } else {
    std::vector<std::future<void>> futs;
    const std::size_t chunk = (cells.size() + threads - 1) / threads;
    for (std::size_t begin = 0; begin < cells.size(); begin += chunk)
      futs.push_back(std::async(std::launch::async, work, begin,
                                std::min(begin + chunk, cells.size())));
    for (auto& f : futs) f.get();
  }

  std::string csv = "c1,c2,c3,u1,u2,u3,eta,class\n";
  for (const auto& row : rows) csv += row + "\n";
  write_file(opts.out_path, csv);
  out << "wrote " << opts.out_path << " (" << rows.size() << " rows)\n";
}

// ---- benchmark ----

struct BenchOpts {
  std::string r_list = "4,8,16,32";
  int n = 4;
  double T = 1.0;
  double dt = 0.01;
  std::string out_path = "benchmark.csv";
};

template <class F>
double measure_ms(F&& fn) {
  using clock = std::chrono::steady_clock;
  fn();  // warm-up, discarded
  std::array<double, 5> samples{};
  for (auto& sample : samples) {
    double total = 0.0;
    int reps = 0;
    do {
      const auto t0 = clock::now();
      fn();
      total +=
          std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      ++reps;
    } while (total < 50.0);
    sample = total / reps;
  }
  std::sort(samples.begin(), samples.end());
  return samples[2];
}

void run_benchmark(const BenchOpts& opts, std::ostream& out) {
  const Vector rs = parse_vector(opts.r_list, "--r-list");
  std::string csv = "r,n,decoupled_ms,coupled_ms,ratio\n";
  out << "r,n,decoupled_ms,coupled_ms,ratio\n";
  for (Eigen::Index i = 0; i < rs.size(); ++i) {
    const double raw = rs[i];
    const int r = static_cast<int>(std::llround(raw));
    if (r < 1 || std::abs(raw - r) > 1e-9)
      throw InvalidStep("--r-list entries must be positive integers");
    const ZooEntry entry = ring_benchmark(r, opts.n);
    const CostSpec cost = *entry.cost;
    const double dec = measure_ms(
        [&] { solve_bellman(entry.model, cost, opts.T, opts.dt); });
    const double coup = measure_ms(
        [&] { solve_coupled_baseline(entry.model, cost, opts.T, opts.dt); });
    const std::string row = std::to_string(r) + "," + std::to_string(opts.n) +
                            "," + fmt17(dec) + "," + fmt17(coup) + "," +
                            fmt17(coup / dec);
    csv += row + "\n";
    out << row << "\n";
  }
  write_file(opts.out_path, csv);
  out << "wrote " << opts.out_path << "\n";
}

// ---- classify ----

void run_classify(const std::string& spec, std::ostream& out) {
  const ZooEntry entry = load_entry(spec);
  const CascadeModel& model = entry.model;
  const Generator joint =
      lift_to_joint(model, constant_policy(model.box_midpoint()), 0.0);
  const int dim = model.r * model.n;
  std::vector<std::pair<JumpMatrix, double>> jumps;
  for (int l = 0; l < dim; ++l)
    for (int k = 0; k < dim; ++k) {
      if (k == l) continue;
      const double rate = joint.m(k, l);
      if (rate > 1e-14) jumps.emplace_back(jump_matrix(l, k, dim), rate);
    }
  const CouplingReport rep = classify_coupling(jumps, model.r, model.n);
  out << to_string(rep.cls) << "\n";
  out << "diagonalizable: " << (rep.diagonalizable ? "yes" : "no") << "\n";
}

// ---- zoo ----

struct ZooOpts {
  std::string name;
  std::string out_path;
  int N = 3;
};

void run_zoo(const ZooOpts& opts, std::ostream& out) {
  if (opts.name.empty()) {
    for (const auto& name : zoo_names()) out << name << "\n";
    return;
  }
  const ZooEntry entry = zoo_by_name(opts.name, opts.N);
  const std::string path =
      opts.out_path.empty() ? opts.name + ".model" : opts.out_path;
  save_model_file(entry, path);
  out << "wrote " << path << "\n";
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const GeneratorInvalid*>(&e) ||
      dynamic_cast<const ControlOutOfBounds*>(&e) ||
      dynamic_cast<const BadState*>(&e) ||
      dynamic_cast<const NonAdmissibleModel*>(&e) ||
      dynamic_cast<const BoxViolation*>(&e) ||
      dynamic_cast<const Reducible*>(&e) ||
      dynamic_cast<const PreconditionNotMet*>(&e))
    return 3;
  if (dynamic_cast<const IndexOutOfRange*>(&e) ||
      dynamic_cast<const SelfLoop*>(&e) ||
      dynamic_cast<const DimensionMismatch*>(&e) ||
      dynamic_cast<const NegativeRate*>(&e) ||
      dynamic_cast<const InvalidStep*>(&e) ||
      dynamic_cast<const BadKind*>(&e) ||
      dynamic_cast<const EmptyInput*>(&e) ||
      dynamic_cast<const TimeOutOfRange*>(&e) ||
      dynamic_cast<const CustomPsiDimension*>(&e) ||
      dynamic_cast<const ParseError*>(&e))
    return 2;
  return 4;  // StepTooLarge, SingularSolve, GridTooLarge, I/O, anything else
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"cascade chain optimal control toolkit"};
  app.require_subcommand(1);

  SolveOpts solve_opts;
  auto* solve_cmd = app.add_subcommand(
      "solve", "integrate the backward value equation for a model");
  solve_cmd->add_option("model", solve_opts.model_spec,
                        "model file or zoo name")->required();
  solve_cmd->add_option("--T", solve_opts.T, "horizon");
  solve_cmd->add_option("--dt", solve_opts.dt, "integration step");
  solve_cmd->add_option("-o,--out", solve_opts.prefix, "output file prefix");
  solve_cmd->add_option("--psi", solve_opts.cost.psi,
                        "control penalty kind (overrides the model file)")
      ->check(CLI::IsMember({"zero", "quad", "custom"}));
  auto* solve_alpha =
      solve_cmd->add_option("--alpha", solve_opts.cost.alpha, "discount rate");
  solve_cmd->add_option("--psi-grid", solve_opts.cost.psi_grid,
                        "grid points per axis for --psi custom");
  solve_cmd->add_flag("--partial-feedback", solve_opts.partial,
                      "also solve with feedback on x only");
  solve_cmd->add_flag("--coupled-baseline", solve_opts.coupled,
                      "also solve the flat equation on the joint chain");
  solve_cmd->add_option("--diag-reduce", solve_opts.diag,
                        "also solve the reduced per-x equation")
      ->check(CLI::IsMember({"c1", "weighted"}));
  solve_cmd->add_option("--c", solve_opts.c_str,
                        "driver law for --diag-reduce weighted "
                        "(default: stationary law of C)");
  solve_cmd->add_option("--pz0", solve_opts.pz0_str,
                        "initial driver law for --partial-feedback "
                        "(default: uniform)");

  SimOpts sim_opts;
  auto* sim_cmd =
      app.add_subcommand("simulate", "sample paths of a controlled model");
  sim_cmd->add_option("model", sim_opts.model_spec, "model file or zoo name")
      ->required();
  sim_cmd->add_option("--T", sim_opts.T, "horizon");
  sim_cmd->add_option("--seed", sim_opts.seed, "random seed");
  sim_cmd->add_option("--paths", sim_opts.paths,
                      "number of paths; more than 1 estimates the cost");
  sim_cmd->add_option("--z0", sim_opts.z0, "initial driver state");
  sim_cmd->add_option("--x0", sim_opts.x0, "initial controlled state");
  sim_cmd->add_option("--threads", sim_opts.threads,
                      "worker threads for --paths > 1");
  sim_cmd->add_option("--policy", sim_opts.policy_prefix,
                      "solve output prefix; loads PREFIX.policy.csv");
  sim_cmd->add_option("--u", sim_opts.u_str,
                      "constant control (default: box midpoint)");
  sim_cmd->add_flag("--portfolio", sim_opts.portfolio,
                    "write the value/trading/price series (needs --paths 1)");
  sim_cmd->add_option("-o,--out", sim_opts.prefix, "output file prefix");
  sim_cmd->add_option("--psi", sim_opts.cost.psi, "control penalty kind")
      ->check(CLI::IsMember({"zero", "quad", "custom"}));
  auto* sim_alpha =
      sim_cmd->add_option("--alpha", sim_opts.cost.alpha, "discount rate");
  sim_cmd->add_option("--psi-grid", sim_opts.cost.psi_grid,
                      "grid points per axis for --psi custom");

  QpOpts qp_opts;
  auto* qp_cmd = app.add_subcommand(
      "qp", "stationary allocation program for a fixed driver law");
  qp_cmd->add_option("--c", qp_opts.c_str, "driver law, three entries")
      ->required();
  qp_cmd->add_option("--grid-step", qp_opts.grid_step,
                     "oracle grid step (must divide the box sides)");
  qp_cmd->add_option("-o,--out", qp_opts.out_path,
                     "also write the JSON report here");

  SweepOpts sweep_opts;
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "solve the allocation program across the driver simplex");
  sweep_cmd->add_option("--resolution", sweep_opts.resolution,
                        "points per simplex edge");
  sweep_cmd->add_option("--threads", sweep_opts.threads, "worker threads");
  sweep_cmd->add_option("-o,--out", sweep_opts.out_path, "output CSV path");

  BenchOpts bench_opts;
  auto* bench_cmd = app.add_subcommand(
      "benchmark", "time the decoupled solver against the flat one");
  bench_cmd->add_option("--r-list", bench_opts.r_list,
                        "driver sizes, comma separated");
  bench_cmd->add_option("--n", bench_opts.n, "controlled chain size");
  bench_cmd->add_option("--T", bench_opts.T, "horizon");
  bench_cmd->add_option("--dt", bench_opts.dt, "integration step");
  bench_cmd->add_option("-o,--out", bench_opts.out_path, "output CSV path");

  std::string classify_spec;
  auto* classify_cmd = app.add_subcommand(
      "classify", "report how a joint chain couples its two coordinates");
  classify_cmd->add_option("model", classify_spec, "model file or zoo name")
      ->required();

  ZooOpts zoo_opts;
  auto* zoo_cmd = app.add_subcommand(
      "zoo", "list built-in models, or export one as a model file");
  zoo_cmd->add_option("name", zoo_opts.name, "zoo model name");
  zoo_cmd->add_option("-o,--out", zoo_opts.out_path,
                      "output path (default: NAME.model)");
  zoo_cmd->add_option("--N", zoo_opts.N,
                      "state count for binary-decision");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("cascade");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  solve_opts.cost.alpha_set = solve_alpha->count() > 0;
  sim_opts.cost.alpha_set = sim_alpha->count() > 0;

  try {
    if (solve_cmd->parsed()) run_solve(solve_opts, out);
    else if (sim_cmd->parsed()) run_simulate(sim_opts, out);
    else if (qp_cmd->parsed()) run_qp(qp_opts, out);
    else if (sweep_cmd->parsed()) run_sweep(sweep_opts, out);
    else if (bench_cmd->parsed()) run_benchmark(bench_opts, out);
    else if (classify_cmd->parsed()) run_classify(classify_spec, out);
    else if (zoo_cmd->parsed()) run_zoo(zoo_opts, out);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace cascade
