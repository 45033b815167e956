#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "geclab/models.hpp"
#include "geclab/policy.hpp"

namespace geclab {

// A test (o_k, a_k, ..., a_{k+W-2}, o_{k+W-1}). The dummy test at the final
// step has no observations.
struct CoreTest {
  std::vector<int> observations;
  std::vector<int> actions;

  bool operator==(const CoreTest&) const = default;
};

// Core tests U_k for 0-based steps k = 0..H. The set at step H holds the
// single dummy test.
class CoreTestSet {
 public:
  explicit CoreTestSet(std::vector<std::vector<CoreTest>> tests);

  // All tests (O x A)^min(m-1, H-1-k) x O at each step.
  static CoreTestSet m_step(int horizon, int m, int num_obs, int num_actions);

  int horizon() const { return static_cast<int>(tests_.size()) - 1; }
  const std::vector<CoreTest>& tests(int step) const { return tests_[step]; }
  int size(int step) const { return static_cast<int>(tests_[step].size()); }
  int index_of(int step, const CoreTest& t) const;

  // Distinct action sequences U_{A,k} in order of first appearance.
  const std::vector<std::vector<int>>& action_sequences(int step) const { return action_sets_[step]; }
  int max_action_sequences() const;

 private:
  std::vector<std::vector<CoreTest>> tests_;
  std::vector<std::vector<std::vector<int>>> action_sets_;
};

// PSR in operator form: P(tau_H) = M_{H-1}(o, a) ... M_0(o, a) q0, with
// op(k, o, a) of shape |U_{k+1}| x |U_k|. Rewards are O x A per step.
class OperatorPsr {
 public:
  OperatorPsr(CoreTestSet core, int num_obs, int num_actions, Eigen::VectorXd q0,
              std::vector<std::vector<std::vector<Eigen::MatrixXd>>> operators,
              std::vector<Eigen::MatrixXd> rewards);

  int horizon() const { return core_.horizon(); }
  int num_observations() const { return num_obs_; }
  int num_actions() const { return num_actions_; }
  const CoreTestSet& core() const { return core_; }
  const Eigen::VectorXd& q0() const { return q0_; }
  const Eigen::MatrixXd& op(int step, int obs, int action) const { return ops_[step][obs][action]; }
  const Eigen::MatrixXd& rewards(int step) const { return rewards_[step]; }
  double reward(int step, int obs, int action) const { return rewards_[step](obs, action); }

  // Covectors z_0..z_H of a completion: z_H = [1], z_k = z_{k+1} sum_o M_k(o, c_k).
  std::vector<Eigen::RowVectorXd> normalizers(std::span<const int> completion) const;
  const std::vector<Eigen::RowVectorXd>& canonical_normalizers() const { return canonical_; }

  // Filter protocol; the filter at step k is q(tau_{k-1}). Marginals use the
  // canonical completion (all zeros).
  Eigen::VectorXd initial_filter() const { return q0_; }
  Eigen::VectorXd observation_joint(int step, const Eigen::VectorXd& q, int action) const;
  Eigen::VectorXd advance(int step, const Eigen::VectorXd& q, int obs, int action) const {
    return ops_[step][obs][action] * q;
  }
  double prefix_mass(int step, const Eigen::VectorXd& q) const { return canonical_[step].dot(q); }

 private:
  CoreTestSet core_;
  int num_obs_;
  int num_actions_;
  Eigen::VectorXd q0_;
  std::vector<std::vector<std::vector<Eigen::MatrixXd>>> ops_;
  std::vector<Eigen::MatrixXd> rewards_;
  std::vector<Eigen::RowVectorXd> canonical_;
};

// G_k = [P(t | s_k = s)] for t in U_k, a |U_k| x S matrix.
Eigen::MatrixXd test_emission_matrix(const TabularPOMDP& pomdp, const CoreTestSet& core, int step);

// Embedding of an m-step weakly revealing POMDP. Throws RankError when a
// core emission matrix that needs a pseudo-inverse has sigma_S below 1e-9.
OperatorPsr psr_from_weakly_revealing_pomdp(const TabularPOMDP& pomdp, int m);

// Decoder phi_k for 0-based step k, indexed by the memory-(m-1) context code
// of the window ending at o_k. Unreachable windows hold -1.
struct Decoder {
  int m = 1;
  std::vector<std::vector<int>> table;

  int decode(int step, std::int64_t window_code) const { return table[step][window_code]; }
};

// Decoder recovered by enumerating all reachable latent paths. Throws
// DecoderError naming a window that maps to two states.
Decoder infer_decoder(const TabularPOMDP& pomdp, int m);

// Throws DecoderError with a counterexample window when the decoder
// disagrees with a reachable latent state.
void verify_decoder(const TabularPOMDP& pomdp, const Decoder& decoder);

// Embedding of an m-step decodable POMDP through its decoder.
OperatorPsr psr_from_decodable_pomdp(const TabularPOMDP& pomdp, const Decoder& decoder);

// Embedding with a single core test at step 0 and the observations as core
// tests afterwards. Needs square invertible emissions at steps 1..H-1; every
// core matrix is then square.
OperatorPsr psr_with_minimal_core(const TabularPOMDP& pomdp);

// POMDP over (s, m) whose emission reveals s. All components share horizon,
// states, actions and rewards.
TabularPOMDP latent_mdp_to_pomdp(const std::vector<TabularMDP>& components,
                                 const Eigen::VectorXd& weights);

// P^pi(tau) under the PSR, clamped at zero.
double psr_trajectory_probability(const OperatorPsr& psr, const Trajectory& tau,
                                  const HistoryPolicy& policy);

// P(o_k | tau_{k-1}) for the prefix (observations o_0..o_{k-1}, actions
// a_0..a_{k-1}) when a_k = action. Audited against the all-last completion.
Eigen::VectorXd conditional_next_obs(const OperatorPsr& psr, std::span<const int> observations,
                                     std::span<const int> actions, int action);

nlohmann::json psr_to_json(const OperatorPsr& psr);
OperatorPsr psr_from_json(const nlohmann::json& j);
OperatorPsr load_psr(const std::string& path);
void save_psr(const std::string& path, const OperatorPsr& psr);

}  // namespace geclab
