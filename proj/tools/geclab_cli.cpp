// geclab command-line driver.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "geclab/acceptance.hpp"
#include "geclab/complexity.hpp"
#include "geclab/errors.hpp"
#include "geclab/harness.hpp"
#include "geclab/hypotheses.hpp"
#include "geclab/model_io.hpp"
#include "geclab/planning.hpp"
#include "geclab/psr.hpp"
#include "geclab/psr_certify.hpp"

namespace {

using namespace geclab;

// "N" means seeds 0..N-1; anything with a comma is an explicit list.
std::vector<std::uint64_t> seeds_from_flag(const std::string& text) {
  if (text.find(',') == std::string::npos) {
    const auto n = parse_seed_list(text).front();
    std::vector<std::uint64_t> out;
    for (std::uint64_t s = 0; s < n; ++s) out.push_back(s);
    return out;
  }
  return parse_seed_list(text);
}

void print_matrix_rows(const Eigen::MatrixXd& m, const std::string& label) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    m.row(r).maxCoeff(&best);
    std::printf("  %s %lld -> action %lld\n", label.c_str(), static_cast<long long>(r), static_cast<long long>(best));
  }
}

int cmd_run(const std::string& config, const std::string& out, const std::string& seeds, int threads) {
  ExperimentConfig cfg = load_config(config);
  if (!out.empty()) cfg.output_dir = out;
  if (!seeds.empty()) cfg.seeds = seeds_from_flag(seeds);
  if (threads > 0) cfg.threads = threads;
  validate_config(cfg);
  const RunSummary s = run_experiment(cfg);
  std::cout << summary_to_json(s).dump(2) << "\n";
  return 0;
}

int cmd_plan(const std::string& path) {
  const Model m = load_model(path);
  if (const auto* mdp = std::get_if<TabularMDP>(&m)) {
    const MdpPlan plan = plan_mdp(*mdp);
    std::printf("V* = %.17g\n", plan.value);
    for (int k = 0; k < mdp->horizon(); ++k) {
      std::printf("step %d\n", k);
      print_matrix_rows(plan.q[k], "state");
    }
    return 0;
  }
  const HistoryPlan plan = std::visit(
      [](const auto& x) -> HistoryPlan {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, TabularMDP>) {
          return plan_history_tree(as_pomdp(x));
        } else {
          return plan_history_tree(x);
        }
      },
      m);
  std::printf("V* = %.17g\n", plan.value);
  const auto& tables = plan.policy.tables();
  for (std::size_t k = 0; k < tables.size(); ++k) {
    std::printf("step %zu\n", k);
    print_matrix_rows(tables[k], "history");
  }
  return 0;
}

int cmd_certify_psr(const std::string& path, int m) {
  const Model model = load_model(path);
  PsrCertificate cert;
  if (const auto* psr = std::get_if<OperatorPsr>(&model)) {
    cert = certify_psr(*psr);
  } else {
    const TabularPOMDP pomdp = std::holds_alternative<TabularPOMDP>(model) ? std::get<TabularPOMDP>(model)
                                                                            : as_pomdp(std::get<TabularMDP>(model));
    cert = certify_psr(psr_from_weakly_revealing_pomdp(pomdp, m), &pomdp);
  }
  std::cout << certificate_to_json(cert).dump(2) << "\n";
  return 0;
}

int cmd_certify_gec(const std::string& path, const std::string& form_name, double eps) {
  const GecTrace trace = gec_trace_from_json(read_json_file(path));
  BurnInForm form = trace.discrepancy_kind == "hellinger-trajectory" ? BurnInForm::kPsr : BurnInForm::kGeneric;
  if (form_name == "psr") form = BurnInForm::kPsr;
  if (form_name == "generic") form = BurnInForm::kGeneric;
  if (eps < 0.0) {
    const double steps = trace.training.empty() ? 1.0 : static_cast<double>(trace.training.front().size());
    eps = 1.0 / (steps * std::sqrt(static_cast<double>(std::max<std::size_t>(1, trace.prediction.size()))));
  }
  std::cout << gec_certificate_to_json(gec_certificate(trace, form, eps)).dump(2) << "\n";
  return 0;
}

int cmd_validate(const std::vector<std::string>& files, const std::string& config) {
  int failures = 0;
  auto check = [&](const std::string& label, auto&& fn) {
    try {
      fn();
      std::printf("ok: %s\n", label.c_str());
    } catch (const std::exception& e) {
      std::printf("invalid: %s: %s\n", label.c_str(), e.what());
      ++failures;
    }
  };
  if (!config.empty()) check(config, [&] { validate_config(load_config(config)); });
  for (const auto& f : files) {
    check(f, [&] {
      const nlohmann::json j = read_json_file(f);
      if (j.contains("environments")) {
        load_model_class(f);
      } else {
        model_from_json(j);
      }
    });
  }
  return failures == 0 ? 0 : 1;
}

int cmd_acceptance(const std::vector<int>& only, int threads) {
  AcceptanceOptions opts;
  opts.threads = std::max(1, threads);
  AcceptanceSuite suite(opts);
  std::vector<int> ids = only;
  if (ids.empty()) {
    for (int i = 1; i <= AcceptanceSuite::kCriteria; ++i) ids.push_back(i);
  }
  int failed = 0;
  for (int id : ids) {
    const CriterionResult r = suite.run(id);
    std::cout << format_result(r) << std::endl;
    if (!r.passed) ++failed;
  }
  std::printf("%zu criteria, %d failed\n", ids.size(), failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geclab: posterior sampling agents, PSR certificates and complexity checks"};
  app.require_subcommand(1);

  std::string config, out, seeds;
  int threads = 0;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory");
  run->add_option("--seeds", seeds, "seed count N (0..N-1) or a comma list");
  run->add_option("--threads", threads, "worker threads");

  std::string model_path;
  int m = 1;
  auto* cpsr = app.add_subcommand("certify-psr", "rank, regularity and delta certificate for a PSR or POMDP file");
  cpsr->add_option("file", model_path, "model file")->required()->check(CLI::ExistingFile);
  cpsr->add_option("--m", m, "core test length for POMDP embedding")->check(CLI::PositiveNumber);

  std::string trace_path, form = "auto";
  double eps = -1.0;
  auto* cgec = app.add_subcommand("certify-gec", "smallest d satisfying a stored GEC trace");
  cgec->add_option("file", trace_path, "trace JSON")->required()->check(CLI::ExistingFile);
  cgec->add_option("--form", form, "burn-in form")->check(CLI::IsMember({"auto", "generic", "psr"}));
  cgec->add_option("--eps", eps, "burn-in epsilon (default 1/(H sqrt T))");

  auto* plan = app.add_subcommand("plan", "optimal value and policy of an environment file");
  plan->add_option("file", model_path, "environment file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> files;
  auto* validate = app.add_subcommand("validate", "check model, class and config files");
  validate->add_option("files", files, "model or class files");
  validate->add_option("--config", config, "config file");

  std::vector<int> only;
  auto* acceptance = app.add_subcommand("acceptance", "run the acceptance suite");
  acceptance->add_option("--only", only, "criterion ids");
  acceptance->add_option("--threads", threads, "worker threads");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out, seeds, threads);
    if (*cpsr) return cmd_certify_psr(model_path, m);
    if (*cgec) return cmd_certify_gec(trace_path, form, eps);
    if (*plan) return cmd_plan(model_path);
    if (*validate) return cmd_validate(files, config);
    if (*acceptance) return cmd_acceptance(only, threads);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
