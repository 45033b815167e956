#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace geclab {

// One episode. observations has H + 1 entries; the last one is the dummy
// index equal to the number of observations.
struct Trajectory {
  std::vector<int> observations;
  std::vector<int> actions;
  std::vector<double> rewards;

  int horizon() const { return static_cast<int>(actions.size()); }
};

// Prefix tau_{k-1} plus the current observation o_k (0-based step k).
// observations holds k + 1 entries and actions holds k.
struct HistoryView {
  std::span<const int> observations;
  std::span<const int> actions;

  int step() const { return static_cast<int>(observations.size()) - 1; }
};

inline constexpr double kStochasticTolerance = 1e-12;

// Finite-horizon MDP. Steps are 0-based. transition(k, a) is S x S and
// column s holds P_k(. | s, a).
class TabularMDP {
 public:
  TabularMDP(std::vector<std::vector<Eigen::MatrixXd>> transitions,
             std::vector<Eigen::MatrixXd> rewards, Eigen::VectorXd initial);

  int horizon() const { return static_cast<int>(transitions_.size()); }
  int num_states() const { return static_cast<int>(initial_.size()); }
  int num_observations() const { return num_states(); }
  int num_actions() const { return static_cast<int>(transitions_.front().size()); }

  const Eigen::MatrixXd& transition(int step, int action) const { return transitions_[step][action]; }
  const Eigen::MatrixXd& rewards(int step) const { return rewards_[step]; }
  double reward(int step, int state, int action) const { return rewards_[step](state, action); }
  const Eigen::VectorXd& initial() const { return initial_; }

  // Filter protocol shared with the other observable models.
  Eigen::VectorXd initial_filter() const { return initial_; }
  Eigen::VectorXd observation_joint(int step, const Eigen::VectorXd& filter, int action) const;
  Eigen::VectorXd advance(int step, const Eigen::VectorXd& filter, int obs, int action) const;
  double prefix_mass(int step, const Eigen::VectorXd& filter) const;

 private:
  std::vector<std::vector<Eigen::MatrixXd>> transitions_;
  std::vector<Eigen::MatrixXd> rewards_;
  Eigen::VectorXd initial_;
};

// Finite-horizon POMDP. emission(k) is O x S with column s holding O_k(. | s);
// rewards(k) is O x A.
class TabularPOMDP {
 public:
  TabularPOMDP(std::vector<std::vector<Eigen::MatrixXd>> transitions,
               std::vector<Eigen::MatrixXd> emissions, std::vector<Eigen::MatrixXd> rewards,
               Eigen::VectorXd initial);

  int horizon() const { return static_cast<int>(transitions_.size()); }
  int num_states() const { return static_cast<int>(initial_.size()); }
  int num_observations() const { return static_cast<int>(emissions_.front().rows()); }
  int num_actions() const { return static_cast<int>(transitions_.front().size()); }

  const Eigen::MatrixXd& transition(int step, int action) const { return transitions_[step][action]; }
  const Eigen::MatrixXd& emission(int step) const { return emissions_[step]; }
  const Eigen::MatrixXd& rewards(int step) const { return rewards_[step]; }
  double reward(int step, int obs, int action) const { return rewards_[step](obs, action); }
  const Eigen::VectorXd& initial() const { return initial_; }

  // The filter is the unnormalized predicted belief P(tau_{k-1}, s_k).
  Eigen::VectorXd initial_filter() const { return initial_; }
  Eigen::VectorXd observation_joint(int step, const Eigen::VectorXd& filter, int action) const;
  Eigen::VectorXd advance(int step, const Eigen::VectorXd& filter, int obs, int action) const;
  double prefix_mass(int step, const Eigen::VectorXd& filter) const;

 private:
  std::vector<std::vector<Eigen::MatrixXd>> transitions_;
  std::vector<Eigen::MatrixXd> emissions_;
  std::vector<Eigen::MatrixXd> rewards_;
  Eigen::VectorXd initial_;
};

// The MDP seen as a POMDP whose emission reveals the state.
TabularPOMDP as_pomdp(const TabularMDP& mdp);

// Sum over steps of the largest reward at that step.
double reward_budget(const std::vector<Eigen::MatrixXd>& rewards);

}  // namespace geclab
