#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

#include "geclab/acceptance.hpp"
#include "geclab/complexity.hpp"
#include "geclab/divergences.hpp"
#include "geclab/errors.hpp"
#include "geclab/harness.hpp"
#include "geclab/model_io.hpp"
#include "geclab/planning.hpp"
#include "geclab/psr.hpp"
#include "geclab/psr_certify.hpp"

namespace py = pybind11;
using namespace geclab;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict check_to_dict(const InequalityCheck& c) {
  py::dict d;
  d["lhs"] = c.lhs;
  d["rhs"] = c.rhs;
  d["margin"] = c.margin;
  d["holds"] = c.holds;
  return d;
}

BurnInForm form_from_name(const std::string& name) {
  if (name == "generic") return BurnInForm::kGeneric;
  if (name == "psr") return BurnInForm::kPsr;
  throw ConfigError("burn-in form must be generic or psr, got '" + name + "'");
}

py::dict plan_file(const std::string& path) {
  const Environment env = load_environment(path);
  py::dict out;
  if (const auto* mdp = std::get_if<TabularMDP>(&env)) {
    const MdpPlan plan = plan_mdp(*mdp);
    out["value"] = plan.value;
    out["q"] = plan.q;
    out["v"] = plan.v;
  } else {
    out["value"] = plan_history_tree(std::get<TabularPOMDP>(env)).value;
  }
  return out;
}

py::object certify_psr_file(const std::string& path, int m) {
  const Environment env = load_environment(path);
  const TabularPOMDP pomdp = std::holds_alternative<TabularPOMDP>(env) ? std::get<TabularPOMDP>(env)
                                                                      : as_pomdp(std::get<TabularMDP>(env));
  return to_python(certificate_to_json(certify_psr(psr_from_weakly_revealing_pomdp(pomdp, m), &pomdp)));
}

py::object run_experiment_file(const std::string& path, std::optional<std::string> output_dir,
                               std::optional<std::vector<std::uint64_t>> seeds, std::optional<int> threads) {
  ExperimentConfig cfg = load_config(path);
  if (output_dir) cfg.output_dir = *output_dir;
  if (seeds) cfg.seeds = *seeds;
  if (threads) cfg.threads = *threads;
  validate_config(cfg);
  RunSummary summary;
  {
    py::gil_scoped_release release;
    summary = run_experiment(cfg);
  }
  return to_python(summary_to_json(summary));
}

py::list run_acceptance(const std::vector<int>& only, int threads) {
  std::vector<CriterionResult> results;
  {
    py::gil_scoped_release release;
    AcceptanceSuite suite(AcceptanceOptions{threads});
    if (only.empty()) {
      results = suite.run_all();
    } else {
      for (int id : only) results.push_back(suite.run(id));
    }
  }
  py::list out;
  for (const auto& r : results) {
    py::dict d;
    d["id"] = r.id;
    d["name"] = r.name;
    d["passed"] = r.passed;
    d["detail"] = r.detail;
    d["seconds"] = r.seconds;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_geclab, m) {
  m.doc() = "Posterior-sampling agents, PSR certificates and complexity checks for tabular models";

  // Translators run newest first, so the subclasses are registered after the base.
  const auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ModelError>(m, "ModelError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<CapacityError>(m, "CapacityError", base);
  py::register_exception<RankError>(m, "RankError", base);

  m.def("hellinger_squared", &hellinger_squared, py::arg("p"), py::arg("q"),
        "1 - sum sqrt(p q) for two distributions on the same support.");
  m.def("total_variation", &total_variation, py::arg("p"), py::arg("q"));
  m.def("kl", &kl, py::arg("p"), py::arg("q"), "inf when p puts mass where q has none.");

  m.def("information_gain", &information_gain, py::arg("xs"), py::arg("eps"));
  m.def(
      "elliptical_potential",
      [](const std::vector<Eigen::VectorXd>& xs, const Eigen::MatrixXd& lambda0) {
        return check_to_dict(elliptical_potential_check(xs, lambda0));
      },
      py::arg("xs"), py::arg("lambda0"));
  m.def("de_dimension", &de_dimension, py::arg("expectations"), py::arg("eps"), py::arg("cap") = 10,
        "expectations[g, j] is E_{mu_j}[g].");
  m.def(
      "gec_certificate",
      [](const py::object& trace, const std::string& form, double eps) {
        return to_python(gec_certificate_to_json(gec_certificate(gec_trace_from_json(from_python(trace)),
                                                                 form_from_name(form), eps)));
      },
      py::arg("trace"), py::arg("form") = "generic", py::arg("eps"));

  m.def("validate_model", [](const std::string& path) { load_environment(path); }, py::arg("path"),
        "Raises ModelError naming the first broken row.");
  m.def("plan", &plan_file, py::arg("path"));
  m.def("certify_psr", &certify_psr_file, py::arg("path"), py::arg("m") = 1);
  m.def("run_experiment", &run_experiment_file, py::arg("config"), py::arg("output_dir") = py::none(),
        py::arg("seeds") = py::none(), py::arg("threads") = py::none());
  m.def("run_acceptance", &run_acceptance, py::arg("only") = std::vector<int>{}, py::arg("threads") = 1);
}
