#pragma once

#include <vector>

#include "geclab/models.hpp"
#include "geclab/policy.hpp"
#include "geclab/rng.hpp"

namespace geclab {

// Random instances for experiments and property checks. Transition and
// emission columns are Dirichlet(1) unless stated; rewards are uniform on
// [0, 1/H] so the budget holds.

Eigen::VectorXd random_simplex(int n, CounterRng& rng, double concentration = 1.0);

TabularMDP random_mdp(int states, int actions, int horizon, CounterRng& rng);

TabularPOMDP random_pomdp(int states, int observations, int actions, int horizon, CounterRng& rng);

// Emission is the identity, so observations equal states.
TabularPOMDP random_identity_pomdp(int states, int actions, int horizon, CounterRng& rng);

// Emission (1 - mix) I + mix * random columns stacked over extra observations;
// every emission has sigma_S at least min_sigma.
TabularPOMDP random_weakly_revealing_pomdp(int states, int observations, int actions, int horizon,
                                           CounterRng& rng, double min_sigma = 0.05);

// Square emissions (1 - mix) I + mix * random, mix <= 0.4.
TabularPOMDP random_invertible_emission_pomdp(int states, int actions, int horizon, CounterRng& rng);

// One-step decodable: state s emits only observations in its own block.
TabularPOMDP random_block_mdp(int states, int block, int actions, int horizon, CounterRng& rng);

// Two-step decodable: state (y, c) emits y; c' is a fixed function of (y, a).
TabularPOMDP random_two_step_decodable(int visible, int hidden, int actions, int horizon,
                                       CounterRng& rng);

std::vector<TabularMDP> random_latent_components(int components, int states, int actions, int horizon,
                                                 CounterRng& rng);

// Deterministic memory-M policy with uniformly drawn actions.
HistoryPolicy random_memory_policy(int memory, int horizon, int num_obs, int num_actions, CounterRng& rng);

}  // namespace geclab
