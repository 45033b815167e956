#include "geclab/generators.hpp"

#include <random>

#include "geclab/errors.hpp"

namespace geclab {
namespace {

std::vector<std::vector<Eigen::MatrixXd>> random_transitions(int states, int actions, int horizon,
                                                             CounterRng& rng) {
  std::vector<std::vector<Eigen::MatrixXd>> t(horizon);
  for (int k = 0; k < horizon; ++k) {
    for (int a = 0; a < actions; ++a) {
      Eigen::MatrixXd m(states, states);
      for (int s = 0; s < states; ++s) m.col(s) = random_simplex(states, rng);
      t[k].push_back(std::move(m));
    }
  }
  return t;
}

std::vector<Eigen::MatrixXd> random_rewards(int rows, int actions, int horizon, CounterRng& rng) {
  std::vector<Eigen::MatrixXd> r;
  for (int k = 0; k < horizon; ++k) {
    Eigen::MatrixXd m(rows, actions);
    for (int i = 0; i < rows; ++i) {
      for (int a = 0; a < actions; ++a) m(i, a) = rng.uniform() / horizon;
    }
    r.push_back(std::move(m));
  }
  return r;
}

}  // namespace

Eigen::VectorXd random_simplex(int n, CounterRng& rng, double concentration) {
  std::gamma_distribution<double> g(concentration, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  const double total = v.sum();
  if (!(total > 0.0)) return Eigen::VectorXd::Constant(n, 1.0 / n);
  v /= total;
  // Make the column sum exactly representable as 1 to machine precision.
  v[n - 1] = std::max(0.0, 1.0 - (v.sum() - v[n - 1]));
  return v;
}

TabularMDP random_mdp(int states, int actions, int horizon, CounterRng& rng) {
  return TabularMDP(random_transitions(states, actions, horizon, rng),
                    random_rewards(states, actions, horizon, rng), random_simplex(states, rng));
}

TabularPOMDP random_pomdp(int states, int observations, int actions, int horizon, CounterRng& rng) {
  auto t = random_transitions(states, actions, horizon, rng);
  std::vector<Eigen::MatrixXd> e;
  for (int k = 0; k < horizon; ++k) {
    Eigen::MatrixXd m(observations, states);
    for (int s = 0; s < states; ++s) m.col(s) = random_simplex(observations, rng);
    e.push_back(std::move(m));
  }
  return TabularPOMDP(std::move(t), std::move(e), random_rewards(observations, actions, horizon, rng),
                      random_simplex(states, rng));
}

TabularPOMDP random_identity_pomdp(int states, int actions, int horizon, CounterRng& rng) {
  auto t = random_transitions(states, actions, horizon, rng);
  std::vector<Eigen::MatrixXd> e(horizon, Eigen::MatrixXd::Identity(states, states));
  return TabularPOMDP(std::move(t), std::move(e), random_rewards(states, actions, horizon, rng),
                      random_simplex(states, rng));
}

TabularPOMDP random_weakly_revealing_pomdp(int states, int observations, int actions, int horizon,
                                           CounterRng& rng, double min_sigma) {
  if (observations < states) throw ModelError("weakly revealing instances need O >= S");
  auto t = random_transitions(states, actions, horizon, rng);
  std::vector<Eigen::MatrixXd> e;
  for (int k = 0; k < horizon; ++k) {
    for (int attempt = 0;; ++attempt) {
      const double mix = 0.2 + 0.5 * rng.uniform();
      Eigen::MatrixXd m(observations, states);
      for (int s = 0; s < states; ++s) {
        Eigen::VectorXd col = mix * random_simplex(observations, rng);
        col[s] += 1.0 - mix;
        m.col(s) = col / col.sum();
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
      if (svd.singularValues()[states - 1] >= min_sigma || attempt > 100) {
        e.push_back(std::move(m));
        break;
      }
    }
  }
  return TabularPOMDP(std::move(t), std::move(e), random_rewards(observations, actions, horizon, rng),
                      random_simplex(states, rng));
}

TabularPOMDP random_invertible_emission_pomdp(int states, int actions, int horizon, CounterRng& rng) {
  auto t = random_transitions(states, actions, horizon, rng);
  std::vector<Eigen::MatrixXd> e;
  for (int k = 0; k < horizon; ++k) {
    const double mix = 0.4 * rng.uniform();
    Eigen::MatrixXd m(states, states);
    for (int s = 0; s < states; ++s) {
      Eigen::VectorXd col = mix * random_simplex(states, rng);
      col[s] += 1.0 - mix;
      m.col(s) = col / col.sum();
    }
    e.push_back(std::move(m));
  }
  return TabularPOMDP(std::move(t), std::move(e), random_rewards(states, actions, horizon, rng),
                      random_simplex(states, rng));
}

TabularPOMDP random_block_mdp(int states, int block, int actions, int horizon, CounterRng& rng) {
  const int obs = states * block;
  auto t = random_transitions(states, actions, horizon, rng);
  std::vector<Eigen::MatrixXd> e;
  for (int k = 0; k < horizon; ++k) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(obs, states);
    for (int s = 0; s < states; ++s) m.block(s * block, s, block, 1) = random_simplex(block, rng);
    e.push_back(std::move(m));
  }
  return TabularPOMDP(std::move(t), std::move(e), random_rewards(obs, actions, horizon, rng),
                      random_simplex(states, rng));
}

TabularPOMDP random_two_step_decodable(int visible, int hidden, int actions, int horizon,
                                       CounterRng& rng) {
  // State index y * hidden + c.
  const int states = visible * hidden;
  std::vector<std::vector<Eigen::MatrixXd>> t(horizon);
  for (int k = 0; k < horizon; ++k) {
    for (int a = 0; a < actions; ++a) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(states, states);
      for (int y = 0; y < visible; ++y) {
        const int c_next = static_cast<int>(rng() % hidden);
        for (int c = 0; c < hidden; ++c) {
          const Eigen::VectorXd py = random_simplex(visible, rng);
          for (int y2 = 0; y2 < visible; ++y2) m(y2 * hidden + c_next, y * hidden + c) = py[y2];
        }
      }
      t[k].push_back(std::move(m));
    }
  }
  std::vector<Eigen::MatrixXd> e;
  for (int k = 0; k < horizon; ++k) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(visible, states);
    for (int y = 0; y < visible; ++y) {
      for (int c = 0; c < hidden; ++c) m(y, y * hidden + c) = 1.0;
    }
    e.push_back(std::move(m));
  }
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(states);
  const Eigen::VectorXd py = random_simplex(visible, rng);
  for (int y = 0; y < visible; ++y) mu[y * hidden] = py[y];
  return TabularPOMDP(std::move(t), std::move(e), random_rewards(visible, actions, horizon, rng), std::move(mu));
}

std::vector<TabularMDP> random_latent_components(int components, int states, int actions, int horizon,
                                                 CounterRng& rng) {
  const auto rewards = random_rewards(states, actions, horizon, rng);
  std::vector<TabularMDP> out;
  for (int j = 0; j < components; ++j) {
    out.emplace_back(random_transitions(states, actions, horizon, rng), rewards, random_simplex(states, rng));
  }
  return out;
}

HistoryPolicy random_memory_policy(int memory, int horizon, int num_obs, int num_actions, CounterRng& rng) {
  std::vector<Eigen::MatrixXd> tables;
  for (int k = 0; k < horizon; ++k) {
    const auto rows = memory_context_count(k, memory, num_obs, num_actions);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows, num_actions);
    for (std::int64_t r = 0; r < rows; ++r) t(r, static_cast<Eigen::Index>(rng() % num_actions)) = 1.0;
    tables.push_back(std::move(t));
  }
  return HistoryPolicy::memory(memory, num_obs, num_actions, std::move(tables));
}

}  // namespace geclab
