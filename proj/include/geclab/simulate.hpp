#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <concepts>
#include <functional>
#include <vector>

#include "geclab/errors.hpp"
#include "geclab/models.hpp"
#include "geclab/policy.hpp"
#include "geclab/rng.hpp"

namespace geclab {

// Models exposing the sequential filter used by the generic algorithms below.
// The filter at step k summarizes tau_{k-1}; observation_joint gives
// P(tau_{k-1}, o_k = o) for every o and prefix_mass gives P(tau_{k-1}).
template <class M>
concept ObservableModel = requires(const M& m, const Eigen::VectorXd& f, int k, int o, int a) {
  { m.horizon() } -> std::convertible_to<int>;
  { m.num_observations() } -> std::convertible_to<int>;
  { m.num_actions() } -> std::convertible_to<int>;
  { m.initial_filter() } -> std::convertible_to<Eigen::VectorXd>;
  { m.observation_joint(k, f, a) } -> std::convertible_to<Eigen::VectorXd>;
  { m.advance(k, f, o, a) } -> std::convertible_to<Eigen::VectorXd>;
  { m.prefix_mass(k, f) } -> std::convertible_to<double>;
  { m.reward(k, o, a) } -> std::convertible_to<double>;
};

// P(tau) for the dynamics alone (no policy factor). Negative noise from
// operator models is clamped to zero.
template <ObservableModel M>
double dynamics_probability(const M& model, const Trajectory& tau) {
  const int horizon = model.horizon();
  if (tau.horizon() != horizon) throw ModelError("trajectory length does not match horizon");
  Eigen::VectorXd f = model.initial_filter();
  for (int k = 0; k < horizon; ++k) f = model.advance(k, f, tau.observations[k], tau.actions[k]);
  return std::max(0.0, model.prefix_mass(horizon, f));
}

// Product of the policy's action probabilities along tau.
double policy_probability(const HistoryPolicy& policy, const Trajectory& tau);

// P^pi(tau) = P(tau) * pi(tau).
template <ObservableModel M>
double trajectory_probability(const M& model, const HistoryPolicy& policy, const Trajectory& tau) {
  const double pi = policy_probability(policy, tau);
  if (pi == 0.0) return 0.0;
  return dynamics_probability(model, tau) * pi;
}

// Visit every trajectory with positive probability under (model, policy).
// The callback receives the trajectory and P^pi(tau).
template <ObservableModel M>
void for_each_trajectory(const M& model, const HistoryPolicy& policy,
                         const std::function<void(const Trajectory&, double)>& visit) {
  const int horizon = model.horizon();
  const int num_obs = model.num_observations();
  Trajectory tau;
  tau.observations.assign(horizon + 1, num_obs);
  tau.actions.assign(horizon, 0);
  tau.rewards.assign(horizon, 0.0);
  std::function<void(int, const Eigen::VectorXd&, double)> rec =
      [&](int k, const Eigen::VectorXd& f, double pi_weight) {
        if (k == horizon) {
          const double p = std::max(0.0, model.prefix_mass(horizon, f)) * pi_weight;
          if (p > 0.0) visit(tau, p);
          return;
        }
        const Eigen::VectorXd joint = model.observation_joint(k, f, 0);
        for (int o = 0; o < num_obs; ++o) {
          if (!(joint[o] > 0.0)) continue;
          tau.observations[k] = o;
          HistoryView view{std::span<const int>(tau.observations.data(), k + 1),
                           std::span<const int>(tau.actions.data(), k)};
          const Eigen::VectorXd dist = policy.distribution(view);
          for (int a = 0; a < model.num_actions(); ++a) {
            if (dist[a] <= 0.0) continue;
            tau.actions[k] = a;
            tau.rewards[k] = model.reward(k, o, a);
            rec(k + 1, model.advance(k, f, o, a), pi_weight * dist[a]);
          }
        }
        tau.observations[k] = num_obs;
      };
  rec(0, model.initial_filter(), 1.0);
}

// Exact expected return of a history policy.
template <ObservableModel M>
double evaluate_policy(const M& model, const HistoryPolicy& policy) {
  const int horizon = model.horizon();
  const int num_obs = model.num_observations();
  std::vector<int> obs(horizon + 1, num_obs), acts(horizon, 0);
  std::function<double(int, const Eigen::VectorXd&)> rec = [&](int k,
                                                               const Eigen::VectorXd& f) {
    if (k == horizon) return 0.0;
    const Eigen::VectorXd joint = model.observation_joint(k, f, 0);
    double value = 0.0;
    for (int o = 0; o < num_obs; ++o) {
      if (!(joint[o] > 0.0)) continue;
      obs[k] = o;
      HistoryView view{std::span<const int>(obs.data(), k + 1),
                       std::span<const int>(acts.data(), k)};
      const Eigen::VectorXd dist = policy.distribution(view);
      for (int a = 0; a < model.num_actions(); ++a) {
        if (dist[a] <= 0.0) continue;
        acts[k] = a;
        value += dist[a] * (joint[o] * model.reward(k, o, a) + rec(k + 1, model.advance(k, f, o, a)));
      }
    }
    return value;
  };
  return rec(0, model.initial_filter());
}

// Draw o_k from the model's conditional law given the prefix held in the filter.
template <ObservableModel M>
int sample_observation(const M& model, int step, const Eigen::VectorXd& filter, CounterRng& rng) {
  Eigen::VectorXd joint = model.observation_joint(step, filter, 0).cwiseMax(0.0);
  if (!(joint.sum() > 0.0)) throw UnreachableHistory("prefix has zero probability");
  return sample_index(std::span<const double>(joint.data(), joint.size()), rng);
}

// Sample an episode by running the model's own conditional observation law.
template <ObservableModel M>
Trajectory sample_from_model(const M& model, const HistoryPolicy& policy, CounterRng& rng) {
  const int horizon = model.horizon();
  Trajectory tau;
  tau.observations.assign(horizon + 1, model.num_observations());
  tau.actions.assign(horizon, 0);
  tau.rewards.assign(horizon, 0.0);
  Eigen::VectorXd f = model.initial_filter();
  for (int k = 0; k < horizon; ++k) {
    const int o = sample_observation(model, k, f, rng);
    tau.observations[k] = o;
    HistoryView view{std::span<const int>(tau.observations.data(), k + 1),
                     std::span<const int>(tau.actions.data(), k)};
    const int a = policy.sample_action(view, rng);
    tau.actions[k] = a;
    tau.rewards[k] = model.reward(k, o, a);
    f = model.advance(k, f, o, a);
  }
  return tau;
}

// Generative sampling through the latent state.
Trajectory sample_episode(const TabularMDP& env, const HistoryPolicy& policy, CounterRng& rng);
Trajectory sample_episode(const TabularPOMDP& env, const HistoryPolicy& policy, CounterRng& rng);

template <class Env>
Trajectory sample_episode(const Env& env, const HistoryPolicy& policy, SeededSampler& sampler) {
  CounterRng rng = sampler.next_episode();
  return sample_episode(env, policy, rng);
}

// Mixed-radix code of the (o, a) pairs of a full or partial history.
std::int64_t history_code(std::span<const int> observations, std::span<const int> actions,
                          int num_obs, int num_actions);

}  // namespace geclab
