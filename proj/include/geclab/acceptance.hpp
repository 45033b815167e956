#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "geclab/agents.hpp"
#include "geclab/hypotheses.hpp"

namespace geclab {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  int threads = 1;
  int seeds = 10;
};

// Regret runs shared between criteria (1, 2 and 10 feed 7 and 8).
struct AcceptanceRuns {
  std::unique_ptr<Model> mdp_env;
  std::unique_ptr<ModelClass> mdp_class;
  std::vector<RunResult> mdp_runs;

  std::unique_ptr<Model> psr_env;
  std::unique_ptr<ModelClass> psr_class;
  std::vector<RunResult> psr_runs;

  std::vector<RunResult> pobilinear_runs;
  std::vector<RunResult> pobilinear_uniform_runs;
};

class AcceptanceSuite {
 public:
  explicit AcceptanceSuite(AcceptanceOptions options = {});

  static constexpr int kCriteria = 10;
  CriterionResult run(int id);
  std::vector<CriterionResult> run_all();

 private:
  CriterionResult sublinear_model_based();
  CriterionResult sublinear_psr();
  CriterionResult psr_embedding();
  CriterionResult regularity();
  CriterionResult divergences();
  CriterionResult potentials();
  CriterionResult gec_consistency();
  CriterionResult posterior_exactness();
  CriterionResult planning();
  CriterionResult pobilinear();

  void ensure_mdp_runs();
  void ensure_psr_runs();
  void ensure_pobilinear_runs();

  AcceptanceOptions options_;
  AcceptanceRuns runs_;
};

// "[PASS] 3 psr embedding exactness (1.2 s): detail".
std::string format_result(const CriterionResult& r);

}  // namespace geclab
