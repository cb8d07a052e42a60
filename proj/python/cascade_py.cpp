#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cascade/bellman.hpp"
#include "cascade/model_io.hpp"
#include "cascade/simulate.hpp"
#include "cascade/singular.hpp"
#include "cascade/zoo.hpp"

namespace py = pybind11;

namespace {

using namespace cascade;

std::string classify_model(const CascadeModel& model) {
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
  return to_string(classify_coupling(jumps, model.r, model.n).cls);
}

}  // namespace

PYBIND11_MODULE(cascade_py, m) {
  m.doc() = "controlled chains driven by an autonomous chain: solvers, "
            "simulation, and the stationary allocation program";

  py::register_exception<Error>(m, "CascadeError");

  py::class_<CascadeModel>(m, "CascadeModel")
      .def_readonly("r", &CascadeModel::r)
      .def_readonly("n", &CascadeModel::n)
      .def_readonly("p", &CascadeModel::p)
      .def_readonly("C", &CascadeModel::C)
      .def_readonly("A0", &CascadeModel::A0)
      .def_readonly("A", &CascadeModel::A)
      .def_readonly("B", &CascadeModel::B)
      .def_readonly("lo", &CascadeModel::lo)
      .def_readonly("hi", &CascadeModel::hi)
      .def("box_midpoint", &CascadeModel::box_midpoint);

  py::enum_<CostSpec::Psi>(m, "Psi")
      .value("ZERO", CostSpec::Psi::Zero)
      .value("QUAD", CostSpec::Psi::Quadratic);

  py::class_<CostSpec>(m, "CostSpec")
      .def(py::init([](int r, int n) { return zero_cost(r, n); }),
           py::arg("r"), py::arg("n"))
      .def_readwrite("L", &CostSpec::L)
      .def_readwrite("Phi", &CostSpec::Phi)
      .def_readwrite("psi", &CostSpec::psi)
      .def_readwrite("alpha", &CostSpec::alpha);

  py::class_<ZooEntry>(m, "ZooEntry")
      .def_readonly("name", &ZooEntry::name)
      .def_readonly("description", &ZooEntry::description)
      .def_readonly("model", &ZooEntry::model)
      .def_readonly("V", &ZooEntry::V)
      .def_readonly("self_financing", &ZooEntry::self_financing)
      .def_readonly("cost", &ZooEntry::cost);

  m.def("zoo", &zoo_by_name, py::arg("name"), py::arg("N") = 3);
  m.def("zoo_names", &zoo_names);
  m.def("parse_model_file", &parse_model_file, py::arg("text"));
  m.def("export_model_file", &export_model_file, py::arg("entry"));
  m.def("classify", &classify_model, py::arg("model"));

  py::class_<Policy>(m, "Policy");
  m.def("constant_policy", &constant_policy, py::arg("u"));

  py::class_<BellmanSolution>(m, "BellmanSolution")
      .def_readonly("grid", &BellmanSolution::grid)
      .def_readonly("K", &BellmanSolution::K)
      .def_readonly("T", &BellmanSolution::T)
      .def_readonly("dt", &BellmanSolution::dt)
      .def("value",
           [](const BellmanSolution& sol, int z0, int x0) {
             return optimal_value(sol, z0, x0);
           },
           py::arg("z0"), py::arg("x0"))
      .def("control",
           [](const BellmanSolution& sol, double t, int z, int x) {
             return optimal_control(sol, t, z, x);
           },
           py::arg("t"), py::arg("z"), py::arg("x"));

  m.def("solve_bellman", &solve_bellman, py::arg("model"), py::arg("cost"),
        py::arg("T"), py::arg("dt") = 1e-3);
  m.def("extract_policy", &extract_policy, py::arg("solution"));

  py::class_<PathEvent>(m, "PathEvent")
      .def_readonly("time", &PathEvent::time)
      .def_property_readonly("chain",
                             [](const PathEvent& e) {
                               return e.chain == PathEvent::Chain::Driver
                                          ? "z" : "x";
                             })
      .def_readonly("src", &PathEvent::from)
      .def_readonly("dst", &PathEvent::to)
      .def_readonly("u", &PathEvent::u);

  py::class_<SamplePath>(m, "SamplePath")
      .def_readonly("seed", &SamplePath::seed)
      .def_readonly("z0", &SamplePath::z0)
      .def_readonly("x0", &SamplePath::x0)
      .def_readonly("T", &SamplePath::T)
      .def_readonly("events", &SamplePath::events)
      .def_readonly("clamped", &SamplePath::clamped)
      .def("z_at", &SamplePath::z_at, py::arg("t"))
      .def("x_at", &SamplePath::x_at, py::arg("t"));

  m.def("simulate", &simulate, py::arg("model"), py::arg("policy"),
        py::arg("z0"), py::arg("x0"), py::arg("T"), py::arg("seed"),
        py::arg("stream") = 0);

  py::class_<EtaEstimate>(m, "EtaEstimate")
      .def_readonly("mean", &EtaEstimate::mean)
      .def_readonly("std_error", &EtaEstimate::std_error)
      .def_readonly("n_paths", &EtaEstimate::n_paths)
      .def_readonly("clamped", &EtaEstimate::clamped)
      .def_readonly("per_path", &EtaEstimate::per_path);

  m.def("estimate_eta", &estimate_eta, py::arg("model"), py::arg("policy"),
        py::arg("cost"), py::arg("z0"), py::arg("x0"), py::arg("T"),
        py::arg("n_paths"), py::arg("seed"), py::arg("threads") = 1);

  m.def("steady_state",
        [](const Matrix& X) { return steady_state(make_generator(X)).v; },
        py::arg("X"));

  py::class_<QpProblem>(m, "QpProblem")
      .def_readonly("H", &QpProblem::H)
      .def_readonly("f", &QpProblem::f)
      .def_readonly("k", &QpProblem::k)
      .def_readonly("A", &QpProblem::A)
      .def_readonly("b", &QpProblem::b)
      .def_readonly("lo", &QpProblem::lo)
      .def_readonly("hi", &QpProblem::hi)
      .def_readonly("c", &QpProblem::c)
      .def("eta", &QpProblem::eta, py::arg("u"));

  py::class_<QpSolution>(m, "QpSolution")
      .def_readonly("u0", &QpSolution::u0)
      .def_readonly("eta_star", &QpSolution::eta_star)
      .def_readonly("active", &QpSolution::active)
      .def_property_readonly(
          "cls", [](const QpSolution& s) { return to_string(s.cls); })
      .def_readonly("max_iterations", &QpSolution::max_iterations);

  m.def("build_qp", &build_qp, py::arg("c"));
  m.def("solve_box_qp", &solve_box_qp, py::arg("qp"));
  m.def("qp_oracle_grid", &qp_oracle_grid, py::arg("qp"), py::arg("step"));
  m.def("singular_closed_form", &singular_closed_form, py::arg("N"),
        py::arg("t"));
}
