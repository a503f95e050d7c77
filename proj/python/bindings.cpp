// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "certrom/commands.hpp"

namespace py = pybind11;
using namespace certrom;

namespace {

struct PyBenchmark {
  explicit PyBenchmark(int mesh_level) {
    GeometryConfig g;
    g.mesh_level = mesh_level;
    bench = std::make_unique<Benchmark>(build_benchmark(benchmark_config(g)));
  }
  std::unique_ptr<Benchmark> bench;
};

}  // namespace

PYBIND11_MODULE(_certrom, m) {
  m.doc() = "Certified reduced-order models for robust shape optimization";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  py::class_<PyBenchmark>(m, "Benchmark")
      .def(py::init<int>(), py::arg("mesh_level") = 3)
      .def_property_readonly("dofs", [](const PyBenchmark& b) { return b.bench->model.dimension(); })
      .def_property_readonly("reference", [](const PyBenchmark& b) { return b.bench->model.reference; })
      .def(
          "output",
          [](const PyBenchmark& b, const std::vector<double>& p, double phi) {
            std::vector<double> ph{phi};
            return b.bench->model.output.dot(solve_state(b.bench->model, p, ph));
          },
          py::arg("p"), py::arg("phi") = 90.0)
      .def(
          "admissible", [](const PyBenchmark& b, const std::vector<double>& p) { return b.bench->model.is_admissible(p); },
          py::arg("p"));

  m.def(
      "dual_norm",
      [](const Vector& v, const Vector& d, const std::string& k) { return dual_norm(v, d, parse_norm_index(k)); },
      py::arg("v"), py::arg("d"), py::arg("k"));
  m.def(
      "trust_region",
      [](double value, const Vector& grad, const Matrix& hess, const Vector& d) {
        QuadraticWorstCaseModel qm{value, grad, hess};
        auto s = solve_trust_region_subproblem(qm, d);
        return py::dict(py::arg("delta") = s.delta, py::arg("lambda_") = s.lambda, py::arg("value") = s.value,
                        py::arg("kkt") = trust_region_kkt_error(qm, d, s));
      },
      py::arg("value"), py::arg("grad"), py::arg("hess"), py::arg("d"));

  m.def("default_config", []() { return to_json_string(RunConfig{}); });
  m.def("config_hash", [](const std::string& json) { return config_hash(parse_config(json)); }, py::arg("json"));
  m.def("normalize_config", [](const std::string& json) { return to_json_string(parse_config(json)); },
        py::arg("json"));

  auto command = [](CommandOutput (*fn)(const RunConfig&, const std::filesystem::path&)) {
    return [fn](const std::string& json, const std::filesystem::path& out) {
      RunConfig cfg = parse_config(json);
      std::filesystem::create_directories(out);
      CommandOutput r;
      {
        py::gil_scoped_release release;
        r = fn(cfg, out);
      }
      std::vector<std::string> files;
      for (const auto& f : r.files) files.push_back(f.string());
      return py::make_tuple(r.report, files);
    };
  };
  m.def("solve", command(&cmd_solve), py::arg("config_json"), py::arg("out"));
  m.def("pod_study", command(&cmd_pod_study), py::arg("config_json"), py::arg("out"));
  m.def("error_study", command(&cmd_error_study), py::arg("config_json"), py::arg("out"));
  m.def("optimize", command(&cmd_optimize), py::arg("config_json"), py::arg("out"));
}
