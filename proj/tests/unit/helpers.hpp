#pragma once

#include <Eigen/Dense>
#include <vector>

#include "geclab/models.hpp"
#include "geclab/rng.hpp"

namespace testutil {

inline Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline geclab::CounterRng rng_for(std::uint64_t stream, std::uint64_t index = 0) {
  return geclab::CounterRng(geclab::derive_key(7, stream, index));
}

// Deterministic MDP: action a moves every state to state a (mod S).
inline geclab::TabularMDP deterministic_mdp(int states, int actions, int horizon,
                                            std::vector<Eigen::MatrixXd> rewards) {
  std::vector<std::vector<Eigen::MatrixXd>> t(horizon);
  for (int k = 0; k < horizon; ++k) {
    for (int a = 0; a < actions; ++a) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(states, states);
      m.row(a % states).setOnes();
      t[k].push_back(m);
    }
  }
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(states);
  mu[0] = 1.0;
  return geclab::TabularMDP(std::move(t), std::move(rewards), mu);
}

}  // namespace testutil
