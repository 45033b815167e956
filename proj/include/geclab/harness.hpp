#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geclab/agents.hpp"
#include "geclab/complexity.hpp"
#include "geclab/hypotheses.hpp"

namespace geclab {

// Flat `key = value` configuration; `#` starts a comment.
//   agent_kind      model-free | model-based | psr | po-bilinear
//   env_file        environment JSON (mdp, pomdp or psr)
//   class_file      class JSON; when absent a perturbation class is drawn
//   class_size, perturbation, class_seed   perturbation class parameters
//   T               episodes
//   gamma, eta, n_batch, d_gec              tuning overrides
//   seeds           comma-separated list
//   output_dir      artifacts directory
//   certify_gec     true | false
//   explore         q-type | v-type (model-free)
//   psr_core_steps  core test length for psr exploration when the truth is not a PSR
//   threads         worker threads for the seed fan-out
// Every key can be overridden by the environment variable GECLAB_<KEY>.
struct ExperimentConfig {
  AgentKind agent_kind = AgentKind::kModelBased;
  std::string env_file;
  std::string class_file;
  int class_size = 10;
  double perturbation = 0.3;
  std::uint64_t class_seed = 0;
  int rounds = 100;
  std::optional<double> gamma;
  std::optional<double> eta;
  std::optional<int> n_batch;
  std::optional<double> d_gec;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "geclab_out";
  bool certify_gec = false;
  ExplorationKind explore = ExplorationKind::kQType;
  int psr_core_steps = 1;
  int threads = 1;
};

// Parses config text. `overrides` maps config keys to values and wins
// over the text.
ExperimentConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides = {});

// GECLAB_<KEY> variables present in the process environment.
std::map<std::string, std::string> environment_overrides();

ExperimentConfig load_config(const std::string& path);

// Throws ConfigError unless the referenced files exist and load, T >= 1 and
// the seeds are distinct.
void validate_config(const ExperimentConfig& cfg);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct SeedSummary {
  std::uint64_t seed = 0;
  double final_regret = 0.0;
  std::vector<double> checkpoints;  // cumulative regret at T/10, T/2, T
  std::vector<double> mass_on_truth;
  double max_normalization_error = 0.0;
  std::optional<GecCertificate> certificate;
};

struct RunSummary {
  std::string agent_kind;
  int rounds = 0;
  std::vector<int> checkpoint_rounds;
  std::vector<SeedSummary> seeds;
  std::vector<double> checkpoint_mean;
  std::vector<double> checkpoint_std;  // population standard deviation
  double final_mean = 0.0;
  double final_std = 0.0;
  double gamma = 0.0;
  double eta = 0.0;
  int n_batch = 1;
};

// Checkpoint rounds T/10, T/2, T (1-based, at least 1) for a run of length n.
std::vector<int> checkpoint_rounds(int n);

nlohmann::json summary_to_json(const RunSummary& s);

void write_regret_csv(const std::string& path, const std::vector<RegretRecord>& records);

// The class named by the config, or a perturbation class around the truth.
AnyClass build_class(const ExperimentConfig& cfg, const Model& env);

// Pairs of (policy, link function) over memory-1 policies: the best memory-1
// policy found by planning plus n - 1 random ones. The truth pair is (0, 0).
HypothesisClass<PoBilinearHypothesis> make_pobilinear_instance_class(const TabularPOMDP& env, int n,
                                                                    std::uint64_t seed);

// The trace matching the agent kind.
GecTrace build_gec_trace(AgentKind kind, const Model& env, const AnyClass& cls, const RunResult& run,
                         const ExperimentConfig& cfg);

BurnInForm burn_in_for(AgentKind kind);

// Runs every seed (in parallel across cfg.threads), writes
// regret_seed<seed>.csv, optional trace_seed<seed>.json and summary.json.
RunSummary run_experiment(const ExperimentConfig& cfg);

}  // namespace geclab
