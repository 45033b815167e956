#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "geclab/hypotheses.hpp"
#include "geclab/models.hpp"
#include "geclab/policy.hpp"
#include "geclab/posterior.hpp"
#include "geclab/psr.hpp"

namespace geclab {

enum class AgentKind { kModelFree, kModelBased, kPsr, kPoBilinear };

AgentKind parse_agent_kind(const std::string& name);
std::string to_string(AgentKind kind);

// Transition (x_k, a_k, r_k, x_{k+1}) at 0-based step k; x_H is the dummy index.
struct Transition {
  int step = 0;
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
};

Transition transition_at(const Trajectory& tau, int step);

// Q_k(x, a) - r - max_a' Q_{k+1}(x', a'), with Q_H = 0.
double bellman_error(const ValueHypothesis& f, const Transition& z);

// Same residual from two adjacent layer tables (next is null at the last step).
double bellman_error(const Eigen::MatrixXd& q, const Eigen::MatrixXd* next, const Transition& z);

// Raw PO-bilinear loss |A| pi(a | zbar_k) (r + g_{k+1}) - g_k.
double pobilinear_loss(int num_actions, double action_prob, double reward, double g_next, double g_now);

// The loss of a hypothesis on the step-k tuple of a trajectory.
double pobilinear_loss(const PoBilinearHypothesis& f, const Trajectory& tau, int step);

// One exploration stage of one episode: the roll-in member, the stage index
// h and the trajectories collected under pi_exp(f^s, h).
struct LedgerEntry {
  int episode = 0;
  int stage = 0;
  std::int64_t roll_in = 0;
  std::vector<Trajectory> samples;
};

// Recorded data plus the per-hypothesis sums the posteriors need.
struct LossLedger {
  std::vector<LedgerEntry> entries;

  // Joint kinds: sum of log-likelihoods (model-based, psr) or of squared
  // batch-mean losses (po-bilinear), one entry per member.
  Eigen::VectorXd log_likelihood;
  Eigen::VectorXd squared_batch_loss;

  // Model-free: pair_loss[k](i, j) = sum of squared errors of (layer k member i,
  // layer k+1 member j) at step-k tuples; last_loss at step H-1.
  std::vector<Eigen::MatrixXd> pair_loss;
  Eigen::VectorXd last_loss;

  // Members that assigned zero probability to a recorded sample.
  std::vector<int> eliminated;

  std::size_t size() const { return entries.size(); }
};

LossLedger make_model_ledger(int class_size);
LossLedger make_value_ledger(const LayeredValueClass& cls);
LossLedger make_pobilinear_ledger(int class_size);

// Accumulators. Each call appends one ledger entry.
void accumulate_model_based(LossLedger& ledger, const ModelClass& cls, LedgerEntry entry);
void accumulate_psr(LossLedger& ledger, const ModelClass& cls, LedgerEntry entry);
void accumulate_model_free(LossLedger& ledger, const LayeredValueClass& cls, LedgerEntry entry);
void accumulate_pobilinear(LossLedger& ledger, const HypothesisClass<PoBilinearHypothesis>& cls,
                           LedgerEntry entry, int n_batch);

// log p0(f) + gamma V_f + eta * sum log-likelihood.
PosteriorState model_based_posterior_update(const LossLedger& ledger, const ModelClass& cls, double gamma,
                                            double eta);
PosteriorState psr_posterior_update(const LossLedger& ledger, const ModelClass& cls, double gamma,
                                    double eta);
// Chain posterior for product classes, joint enumeration over the explicit
// support otherwise (CapacityError above the cap).
PosteriorState model_free_posterior_update(const LossLedger& ledger, const LayeredValueClass& cls,
                                           const Eigen::VectorXd& mu, double gamma, double eta,
                                           std::int64_t joint_cap = 100000);
PosteriorState pobilinear_posterior_update(const LossLedger& ledger,
                                           const HypothesisClass<PoBilinearHypothesis>& cls, double gamma,
                                           double eta);

struct RegretRecord {
  int t = 0;
  std::int64_t hypothesis_index = 0;
  double v_pred = 0.0;
  double v_realized = 0.0;
  double regret_step = 0.0;
  double regret_cum = 0.0;
  double mass_on_truth = 0.0;
};

struct AgentConfig {
  AgentKind kind = AgentKind::kModelBased;
  int rounds = 1;
  std::optional<double> gamma;
  std::optional<double> eta;
  std::optional<int> n_batch;
  std::optional<double> d_gec;
  std::uint64_t seed = 0;
  ExplorationKind explore = ExplorationKind::kQType;  // model-free only
  int psr_core_steps = 1;
  bool keep_ledger = false;
  // Pick hypotheses uniformly instead of from the posterior (baseline).
  bool uniform_selection = false;
};

struct RunResult {
  std::vector<RegretRecord> records;
  std::vector<std::vector<int>> sampled;  // per round, the member (chain: one index per step)
  double gamma = 0.0;
  double eta = 0.0;
  int n_batch = 1;
  double d_gec = 0.0;
  int stages = 0;
  double v_star = 0.0;
  double max_normalization_error = 0.0;
  std::vector<int> eliminated;
  LossLedger ledger;  // filled when keep_ledger is set
};

// Tuning resolved from the config and the class.
struct Tuning {
  double gamma = 0.0;
  double eta = 0.0;
  double d_gec = 0.0;
  int n_batch = 1;
  int iterations = 1;  // po-bilinear rounds
};

Tuning resolve_tuning(const AgentConfig& cfg, int class_size, int horizon, int num_obs, int num_actions,
                      int num_states, double psr_d = 0.0);

// Default d for the psr agent from the certificate of the truth member.
double psr_default_d(const ModelClass& cls, int rounds);

// Core tests whose action sequences drive psr-type exploration.
CoreTestSet psr_exploration_core(const ModelClass& cls, int psr_core_steps);

RunResult run_model_based(const Model& env, const ModelClass& cls, const AgentConfig& cfg);
RunResult run_psr(const Model& env, const ModelClass& cls, const AgentConfig& cfg);
RunResult run_model_free(const TabularMDP& env, const LayeredValueClass& cls, const AgentConfig& cfg);
RunResult run_pobilinear(const TabularPOMDP& env, const HypothesisClass<PoBilinearHypothesis>& cls,
                         const AgentConfig& cfg);

using AnyClass = std::variant<ModelClass, LayeredValueClass, HypothesisClass<PoBilinearHypothesis>>;

// Dispatch on cfg.kind.
RunResult run_gps_idm(const Model& env, const AnyClass& cls, const AgentConfig& cfg);

}  // namespace geclab
