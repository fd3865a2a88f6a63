#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "perfpeel/bench.hpp"
#include "perfpeel/errors.hpp"
#include "perfpeel/hodlr.hpp"
#include "perfpeel/peel.hpp"

namespace py = pybind11;
using namespace perfpeel;

namespace {

// Accepts a dense array or a (n, matvec) pair where matvec(X, transpose)
// returns A @ X or A.T @ X.
LinearOperator to_operator(const py::object& obj) {
  if (py::isinstance<py::tuple>(obj)) {
    const auto t = obj.cast<py::tuple>();
    if (t.size() != 2) throw ConfigError("operator tuple must be (n, matvec)");
    const Index n = t[0].cast<Index>();
    auto fn = t[1].cast<std::function<MatrixXd(const MatrixXd&, bool)>>();
    return LinearOperator(n, [fn](const MatrixXd& X, Side side) { return fn(X, side == Side::transpose); },
                          "python");
  }
  if (py::isinstance<HodlrMatrix>(obj)) return as_operator(obj.cast<HodlrMatrix>());
  return make_dense_operator(obj.cast<MatrixXd>());
}

py::dict counts_dict(const QueryCounts& c) {
  py::dict d;
  d["forward"] = c.forward;
  d["transpose"] = c.transpose;
  return d;
}

}  // namespace

PYBIND11_MODULE(_perfpeel, m) {
  m.doc() = "HODLR(k) approximation from matrix-vector queries";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<StructureViolation>(m, "StructureViolation", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_RuntimeError);

  py::class_<HodlrMatrix>(m, "HodlrMatrix")
      .def_property_readonly("n", &HodlrMatrix::size)
      .def_property_readonly("k", &HodlrMatrix::rank_parameter)
      .def_property_readonly("levels", &HodlrMatrix::level_count)
      .def_property_readonly("n_base", [](const HodlrMatrix& H) { return H.structure().n_base; })
      .def("max_rank", &HodlrMatrix::max_rank)
      .def("to_dense", [](const HodlrMatrix& H) { return to_dense(H); })
      .def("level_dense", [](const HodlrMatrix& H, int l) { return level_dense(H, l); })
      .def("leaves", &HodlrMatrix::leaves)
      .def("matmat", [](const HodlrMatrix& H, const MatrixXd& X, bool transpose) {
        return hodlr_apply(H, X, transpose ? Side::transpose : Side::forward);
      }, py::arg("X"), py::arg("transpose") = false);

  py::class_<PeelConfig>(m, "PeelConfig")
      .def(py::init<>())
      .def_readwrite("k", &PeelConfig::k)
      .def_readwrite("s_R", &PeelConfig::s_R)
      .def_readwrite("t_R", &PeelConfig::t_R)
      .def_readwrite("s_L", &PeelConfig::s_L)
      .def_readwrite("t_L", &PeelConfig::t_L)
      .def_readwrite("seed", &PeelConfig::seed)
      .def_readwrite("beta", &PeelConfig::beta)
      .def_readwrite("truncate", &PeelConfig::truncate)
      .def_property("variant", [](const PeelConfig& c) { return variant_name(c.variant); },
                    [](PeelConfig& c, const std::string& v) { c.variant = parse_variant(v); })
      .def_property("validation",
                    [](const PeelConfig& c) {
                      return c.validation == Validation::strict ? "strict"
                             : c.validation == Validation::advisory ? "advisory" : "off";
                    },
                    [](PeelConfig& c, const std::string& v) {
                      if (v == "strict") c.validation = Validation::strict;
                      else if (v == "advisory") c.validation = Validation::advisory;
                      else if (v == "off") c.validation = Validation::off;
                      else throw ConfigError("unknown validation mode: " + v);
                    })
      .def("violations", [](const PeelConfig& c) { return validity_violations(c); });

  py::class_<PeelReport>(m, "PeelReport")
      .def_property_readonly("counts", [](const PeelReport& r) { return counts_dict(r.counts); })
      .def_property_readonly("expected", [](const PeelReport& r) { return counts_dict(r.expected); })
      .def_readonly("seconds", &PeelReport::seconds)
      .def_readonly("violations", &PeelReport::violations)
      .def_readonly("error", &PeelReport::error)
      .def_readonly("opt", &PeelReport::opt)
      .def_readonly("approximation_factor", &PeelReport::approximation_factor);

  m.def("peel", [](const py::object& op, const PeelConfig& cfg, std::optional<double> opt) {
    PeelOptions opts;
    opts.opt = opt;
    // Dense input doubles as the reference for error diagnostics.
    std::optional<MatrixXd> dense;
    if (!py::isinstance<py::tuple>(op) && !py::isinstance<HodlrMatrix>(op)) {
      dense = op.cast<MatrixXd>();
      opts.dense_reference = &*dense;
    }
    PeelResult r = peel(dense ? make_dense_operator(*dense) : to_operator(op), cfg, opts);
    return py::make_tuple(std::move(r.hodlr), std::move(r.report));
  }, py::arg("operator"), py::arg("config"), py::arg("opt") = py::none(),
        "Peel a HODLR(k) approximation; returns (HodlrMatrix, PeelReport).");

  m.def("exact_recover", [](const py::object& op, Index k, std::uint64_t seed) {
    PeelReport report;
    HodlrMatrix H = exact_recover(to_operator(op), k, seed, &report);
    return py::make_tuple(std::move(H), std::move(report));
  }, py::arg("operator"), py::arg("k"), py::arg("seed") = 0);

  m.def("params_for_beta", [](Index k, double beta, const std::string& variant) {
    return params_for_beta(k, beta, parse_variant(variant));
  }, py::arg("k"), py::arg("beta"), py::arg("variant") = "gn");
  m.def("preset_config", [](const std::string& preset, Index k, double beta) {
    return preset_config(parse_preset(preset), k, beta);
  }, py::arg("preset"), py::arg("k"), py::arg("beta"));
  m.def("expected_counts", [](const PeelConfig& cfg, Index n) { return counts_dict(expected_counts(cfg, n)); });

  m.def("best_hodlr", &best_hodlr, py::arg("A"), py::arg("k"));
  m.def("random_hodlr", &random_hodlr, py::arg("n"), py::arg("k"), py::arg("seed"));
  m.def("serialize", [](const HodlrMatrix& H) { return py::bytes(serialize(H)); });
  m.def("deserialize", [](const py::bytes& b) { return deserialize(std::string(b)); });
  m.def("save_hodlr", &save_hodlr, py::arg("path"), py::arg("H"));
  m.def("load_hodlr", &load_hodlr, py::arg("path"));

  m.def("experiment_names", &experiment_names);
  m.def("run_experiment", [](const std::string& name, int trials, std::uint64_t seed, py::dict grid) {
    ExperimentGrid g = default_grid(name);
    if (grid.contains("presets")) g.presets = grid["presets"].cast<std::vector<std::string>>();
    if (grid.contains("ks")) g.ks = grid["ks"].cast<std::vector<Index>>();
    if (grid.contains("betas")) g.betas = grid["betas"].cast<std::vector<double>>();
    if (grid.contains("ns")) g.ns = grid["ns"].cast<std::vector<Index>>();
    if (grid.contains("eta")) g.eta = grid["eta"].cast<double>();
    std::ostringstream out;
    write_results_csv(out, run_experiment(name, g, trials, seed));
    return out.str();
  }, py::arg("name"), py::arg("trials") = 1, py::arg("seed") = 0, py::arg("grid") = py::dict(),
        "Run an experiment and return its results as CSV text.");
  m.def("run_bound_checks", [](std::uint64_t seed) {
    py::list out;
    for (const auto& c : run_bound_checks(seed)) {
      py::dict d;
      d["name"] = c.name;
      d["passed"] = c.passed;
      d["observed"] = c.observed;
      d["limit"] = c.limit;
      d["detail"] = c.detail;
      out.append(d);
    }
    return out;
  }, py::arg("seed") = 0);
}
