#include "geclab/simulate.hpp"

namespace geclab {

double policy_probability(const HistoryPolicy& policy, const Trajectory& tau) {
  double p = 1.0;
  for (int k = 0; k < tau.horizon() && p > 0.0; ++k) {
    HistoryView view{std::span<const int>(tau.observations.data(), k + 1),
                     std::span<const int>(tau.actions.data(), k)};
    p *= policy.distribution(view)[tau.actions[k]];
  }
  return p;
}

namespace {

int draw_column(const Eigen::MatrixXd& m, int col, CounterRng& rng) {
  return sample_index(std::span<const double>(m.col(col).data(), m.rows()), rng);
}

}  // namespace

Trajectory sample_episode(const TabularMDP& env, const HistoryPolicy& policy, CounterRng& rng) {
  const int horizon = env.horizon();
  Trajectory tau;
  tau.observations.assign(horizon + 1, env.num_states());
  tau.actions.assign(horizon, 0);
  tau.rewards.assign(horizon, 0.0);
  const Eigen::VectorXd& mu = env.initial();
  int s = sample_index(std::span<const double>(mu.data(), mu.size()), rng);
  for (int k = 0; k < horizon; ++k) {
    tau.observations[k] = s;
    HistoryView view{std::span<const int>(tau.observations.data(), k + 1),
                     std::span<const int>(tau.actions.data(), k)};
    const int a = policy.sample_action(view, rng);
    tau.actions[k] = a;
    tau.rewards[k] = env.reward(k, s, a);
    if (k + 1 < horizon) s = draw_column(env.transition(k, a), s, rng);
  }
  return tau;
}

Trajectory sample_episode(const TabularPOMDP& env, const HistoryPolicy& policy, CounterRng& rng) {
  const int horizon = env.horizon();
  Trajectory tau;
  tau.observations.assign(horizon + 1, env.num_observations());
  tau.actions.assign(horizon, 0);
  tau.rewards.assign(horizon, 0.0);
  const Eigen::VectorXd& mu = env.initial();
  int s = sample_index(std::span<const double>(mu.data(), mu.size()), rng);
  for (int k = 0; k < horizon; ++k) {
    const int o = draw_column(env.emission(k), s, rng);
    tau.observations[k] = o;
    HistoryView view{std::span<const int>(tau.observations.data(), k + 1),
                     std::span<const int>(tau.actions.data(), k)};
    const int a = policy.sample_action(view, rng);
    tau.actions[k] = a;
    tau.rewards[k] = env.reward(k, o, a);
    if (k + 1 < horizon) s = draw_column(env.transition(k, a), s, rng);
  }
  return tau;
}

std::int64_t history_code(std::span<const int> observations, std::span<const int> actions,
                          int num_obs, int num_actions) {
  std::int64_t code = 0;
  for (std::size_t j = 0; j < actions.size(); ++j) {
    code = code * num_obs * num_actions + observations[j] * num_actions + actions[j];
  }
  return code;
}

}  // namespace geclab
