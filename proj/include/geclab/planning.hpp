#pragma once

#include <Eigen/Dense>
#include <functional>
#include <sstream>
#include <vector>

#include "geclab/errors.hpp"
#include "geclab/models.hpp"
#include "geclab/policy.hpp"
#include "geclab/simulate.hpp"

namespace geclab {

inline constexpr std::int64_t kDefaultNodeCap = 1000000;

struct MdpPlan {
  std::vector<Eigen::MatrixXd> q;  // q[k] is S x A
  std::vector<Eigen::VectorXd> v;  // v[k] for k = 0..H, v[H] = 0
  HistoryPolicy policy;            // greedy, ties to the lowest action
  double value = 0.0;              // E_{s ~ mu} v[0](s)
};

// Backward induction.
MdpPlan plan_mdp(const TabularMDP& mdp);

// Q_k(s, a) - r_k(s, a) - E V_{k+1} for a list of Q tables against the MDP.
std::vector<Eigen::MatrixXd> bellman_residuals(const TabularMDP& mdp,
                                               const std::vector<Eigen::MatrixXd>& q);

struct HistoryPlan {
  double value = 0.0;
  HistoryPolicy policy;  // memory-H table over full histories
};

std::int64_t history_tree_nodes(int horizon, int num_obs, int num_actions);

// Optimal history-dependent policy by exhaustive search over the history tree.
template <ObservableModel M>
HistoryPlan plan_history_tree(const M& model, std::int64_t node_cap = kDefaultNodeCap) {
  const int horizon = model.horizon();
  const int num_obs = model.num_observations();
  const int num_actions = model.num_actions();
  const std::int64_t nodes = history_tree_nodes(horizon, num_obs, num_actions);
  if (nodes < 0 || nodes > node_cap) {
    std::ostringstream msg;
    msg << "history tree has more than " << node_cap << " nodes";
    throw CapacityError(msg.str());
  }
  std::vector<Eigen::MatrixXd> tables;
  for (int k = 0; k < horizon; ++k) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(memory_context_count(k, horizon, num_obs, num_actions), num_actions);
    t.col(0).setOnes();
    tables.push_back(std::move(t));
  }
  // rec returns the expected future reward weighted by the prefix probability.
  std::function<double(int, const Eigen::VectorXd&, std::int64_t)> rec =
      [&](int k, const Eigen::VectorXd& f, std::int64_t pairs_code) -> double {
    if (k == horizon) return 0.0;
    const Eigen::VectorXd joint = model.observation_joint(k, f, 0);
    double total = 0.0;
    for (int o = 0; o < num_obs; ++o) {
      if (!(joint[o] > 0.0)) continue;
      int best = 0;
      double best_value = 0.0;
      for (int a = 0; a < num_actions; ++a) {
        const double v = joint[o] * model.reward(k, o, a) +
                         rec(k + 1, model.advance(k, f, o, a),
                             pairs_code * num_obs * num_actions + o * num_actions + a);
        if (a == 0 || v > best_value) {
          best = a;
          best_value = v;
        }
      }
      auto row = tables[k].row(pairs_code * num_obs + o);
      row.setZero();
      row[best] = 1.0;
      total += best_value;
    }
    return total;
  };
  HistoryPlan plan{0.0, HistoryPolicy::uniform(horizon, num_obs, num_actions)};
  plan.value = rec(0, model.initial_filter(), 0);
  plan.policy = HistoryPolicy::memory(horizon, num_obs, num_actions, std::move(tables));
  return plan;
}

}  // namespace geclab
