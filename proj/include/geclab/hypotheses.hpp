#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "geclab/model_io.hpp"
#include "geclab/models.hpp"
#include "geclab/planning.hpp"
#include "geclab/policy.hpp"
#include "geclab/psr.hpp"
#include "geclab/rng.hpp"

namespace geclab {

using Model = std::variant<TabularMDP, TabularPOMDP, OperatorPsr>;

int model_horizon(const Model& m);
int model_observations(const Model& m);
int model_actions(const Model& m);
double model_trajectory_probability(const Model& m, const Trajectory& tau);
double model_policy_value(const Model& m, const HistoryPolicy& policy);

// A model together with its optimal value V_f and optimal policy pi_f.
struct ModelHypothesis {
  Model model;
  double value = 0.0;
  HistoryPolicy policy;
};

ModelHypothesis make_model_hypothesis(Model model, std::int64_t node_cap = kDefaultNodeCap);

template <class Hypothesis>
struct HypothesisClass {
  std::vector<Hypothesis> members;
  Eigen::VectorXd prior;
  int truth = -1;

  int size() const { return static_cast<int>(members.size()); }
};

// Throws ConfigError unless the prior is a distribution over the members and
// the truth index is valid.
void validate_prior(const Eigen::VectorXd& prior, int size, int truth);

using ModelClass = HypothesisClass<ModelHypothesis>;

// n hypotheses: the truth at index 0 and n - 1 Dirichlet perturbations of
// every transition and emission row with concentration row / eps. Rewards and
// the initial distribution are kept. Uniform prior.
ModelClass make_perturbation_class(const Model& truth, int n, double eps, SeededSampler& sampler);

// Value-based class factored over steps: a hypothesis picks one Q table per step.
struct ValueHypothesis {
  std::vector<Eigen::MatrixXd> q;  // q[k] is S x A

  double initial_value(const Eigen::VectorXd& mu) const;
  HistoryPolicy policy() const { return HistoryPolicy::greedy(q); }
};

struct LayeredValueClass {
  std::vector<std::vector<Eigen::MatrixXd>> layers;  // layers[k][i]
  std::vector<Eigen::VectorXd> layer_priors;
  std::vector<int> truth;  // per step index of Q*_k, -1 when absent
  // Explicit support for classes that are not a product over steps.
  std::vector<std::vector<int>> support;
  Eigen::VectorXd support_prior;

  int horizon() const { return static_cast<int>(layers.size()); }
  bool factored() const { return support.empty(); }
  ValueHypothesis hypothesis(std::span<const int> index) const;
  std::int64_t size() const;
};

void validate_value_class(const LayeredValueClass& cls);

// Layers hold the distinct optimal Q tables of the given models; the truth
// indices point at the Q* tables of `truth` when present.
LayeredValueClass value_class_from_models(const std::vector<TabularMDP>& models,
                                          const TabularMDP& truth);

// Link tables g_k indexed by the memory context code of zbar_k.
struct LinkFunction {
  int memory = 0;
  std::vector<Eigen::VectorXd> tables;

  double at(int step, std::int64_t context) const {
    return step < static_cast<int>(tables.size()) ? tables[step][context] : 0.0;
  }
};

struct PoBilinearHypothesis {
  HistoryPolicy policy;  // memory-M table policy
  LinkFunction link;
  double value = 0.0;  // E g_0(o_0)
};

// V^pi_k(z_{k-1}, s) for a memory policy; entry k is (pairs contexts) x S.
std::vector<Eigen::MatrixXd> memory_policy_state_values(const TabularPOMDP& pomdp,
                                                        const HistoryPolicy& policy);

// g_k(z, .) = pinv(O_k^T) V_k(z, .). Needs every O_k of full column rank.
LinkFunction solve_link_function(const TabularPOMDP& pomdp, const HistoryPolicy& policy);

// E_{o_0} g_0(o_0).
double link_value(const TabularPOMDP& pomdp, const LinkFunction& link);

// max |O_k^T g_k(z, .) - V_k(z, .)|.
double link_residual(const TabularPOMDP& pomdp, const HistoryPolicy& policy, const LinkFunction& link);

// All pairs (pi_i, g^{pi_j}); the truth is (i, i) for truth_policy = i.
HypothesisClass<PoBilinearHypothesis> make_pobilinear_class(const TabularPOMDP& pomdp,
                                                           const std::vector<HistoryPolicy>& policies,
                                                           int truth_policy);

struct RealizabilityReport {
  bool realizable = false;
  double max_deviation = 0.0;
  std::string location;
};

// The truth member reproduces the environment's trajectory probabilities on
// trajectories drawn under the uniform policy.
RealizabilityReport audit_realizability(const ModelClass& cls, const Model& env, int samples,
                                        std::uint64_t seed, double tol = 1e-10);

// The truth tuple equals Q* of the environment.
RealizabilityReport audit_value_realizability(const LayeredValueClass& cls, const TabularMDP& env,
                                              double tol = 1e-10);

// True when T_k Q_{k+1} lies in layer k for every Q_{k+1} in layer k + 1.
bool value_class_complete(const LayeredValueClass& cls, const TabularMDP& env, double tol = 1e-10);

Model model_from_json(const nlohmann::json& j);
Model load_model(const std::string& path);
nlohmann::json model_to_json(const Model& m);

// Class files: {"environments": [paths relative to the file], "prior": [...], "truth": i}.
ModelClass load_model_class(const std::string& path);
void save_model_class(const std::string& path, const ModelClass& cls);

}  // namespace geclab
