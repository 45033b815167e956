#include "geclab/planning.hpp"

namespace geclab {

MdpPlan plan_mdp(const TabularMDP& mdp) {
  const int horizon = mdp.horizon();
  const int s = mdp.num_states();
  const int num_actions = mdp.num_actions();
  std::vector<Eigen::MatrixXd> q(horizon);
  std::vector<Eigen::VectorXd> v(horizon + 1);
  v[horizon] = Eigen::VectorXd::Zero(s);
  for (int k = horizon - 1; k >= 0; --k) {
    q[k] = mdp.rewards(k);
    for (int a = 0; a < num_actions; ++a) {
      q[k].col(a) += mdp.transition(k, a).transpose() * v[k + 1];
    }
    v[k] = q[k].rowwise().maxCoeff();
  }
  HistoryPolicy policy = HistoryPolicy::greedy(q);
  const double value = mdp.initial().dot(v[0]);
  return MdpPlan{std::move(q), std::move(v), std::move(policy), value};
}

std::vector<Eigen::MatrixXd> bellman_residuals(const TabularMDP& mdp,
                                               const std::vector<Eigen::MatrixXd>& q) {
  const int horizon = mdp.horizon();
  std::vector<Eigen::MatrixXd> out(horizon);
  for (int k = 0; k < horizon; ++k) {
    Eigen::VectorXd next = k + 1 < horizon ? Eigen::VectorXd(q[k + 1].rowwise().maxCoeff())
                                           : Eigen::VectorXd::Zero(mdp.num_states());
    out[k] = q[k] - mdp.rewards(k);
    for (int a = 0; a < mdp.num_actions(); ++a) {
      out[k].col(a) -= mdp.transition(k, a).transpose() * next;
    }
  }
  return out;
}

std::int64_t history_tree_nodes(int horizon, int num_obs, int num_actions) {
  std::int64_t total = 0;
  std::int64_t layer = num_obs;
  const std::int64_t radix = static_cast<std::int64_t>(num_obs) * num_actions;
  for (int k = 0; k < horizon; ++k) {
    total += layer;
    if (total > (std::int64_t{1} << 50)) return -1;
    layer *= radix;
  }
  return total;
}

}  // namespace geclab
