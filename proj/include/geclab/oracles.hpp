#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "geclab/agents.hpp"
#include "geclab/hypotheses.hpp"
#include "geclab/models.hpp"
#include "geclab/policy.hpp"

namespace geclab::oracle {

// Reference computations that share no code path with the library routines
// they check. They are exponential and meant for tiny instances.

// Best value over all deterministic Markov policies, each evaluated by
// propagating the state distribution forward.
double brute_force_mdp_value(const TabularMDP& mdp);

// P(tau) by summing over every latent state path.
double latent_path_probability(const TabularPOMDP& pomdp, const Trajectory& tau);

// Every observation/action sequence of length H in mixed-radix order.
std::vector<Trajectory> all_sequences(int horizon, int num_obs, int num_actions);

// Expected return of a policy as a sum over all sequences with latent-path probabilities.
double latent_path_policy_value(const TabularPOMDP& pomdp, const HistoryPolicy& policy);

// Best value over every deterministic history-dependent policy.
double brute_force_history_value(const TabularPOMDP& pomdp);

// Posterior over all tuples of a product value class, recomputed from the raw
// ledger samples. Entry order is mixed radix over steps (step 0 most significant).
Eigen::VectorXd joint_value_posterior(const LayeredValueClass& cls, const std::vector<LedgerEntry>& entries,
                                      const Eigen::VectorXd& mu, double gamma, double eta);

// Longest eps-independent sequence by enumerating ordered sequences for each
// candidate threshold.
int brute_force_de_dimension(const Eigen::MatrixXd& expectations, double eps);

}  // namespace geclab::oracle
