#include "geclab/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "geclab/errors.hpp"
#include "geclab/posterior.hpp"
#include "geclab/simulate.hpp"

namespace geclab::oracle {

double brute_force_mdp_value(const TabularMDP& mdp) {
  const int horizon = mdp.horizon(), states = mdp.num_states(), actions = mdp.num_actions();
  const int slots = states * horizon;
  double total = 1.0;
  for (int i = 0; i < slots; ++i) total *= actions;
  if (total > 1e7) throw CapacityError("brute_force_mdp_value: too many policies");
  double best = -1.0;
  std::vector<int> choice(slots, 0);
  for (long long code = 0; code < static_cast<long long>(total); ++code) {
    long long rest = code;
    for (int i = 0; i < slots; ++i) {
      choice[i] = static_cast<int>(rest % actions);
      rest /= actions;
    }
    Eigen::VectorXd d = mdp.initial();
    double value = 0.0;
    for (int k = 0; k < horizon; ++k) {
      Eigen::VectorXd next = Eigen::VectorXd::Zero(states);
      for (int s = 0; s < states; ++s) {
        const int a = choice[k * states + s];
        value += d[s] * mdp.reward(k, s, a);
        next += d[s] * mdp.transition(k, a).col(s);
      }
      d = next;
    }
    best = std::max(best, value);
  }
  return best;
}

double latent_path_probability(const TabularPOMDP& pomdp, const Trajectory& tau) {
  const int horizon = pomdp.horizon(), states = pomdp.num_states();
  double total = 0.0;
  std::vector<int> path(horizon, 0);
  std::function<void(int, double)> rec = [&](int k, double p) {
    if (p == 0.0) return;
    if (k == horizon) {
      total += p;
      return;
    }
    for (int s = 0; s < states; ++s) {
      double q = k == 0 ? pomdp.initial()[s] : pomdp.transition(k - 1, tau.actions[k - 1])(s, path[k - 1]);
      q *= pomdp.emission(k)(tau.observations[k], s);
      path[k] = s;
      rec(k + 1, p * q);
    }
  };
  rec(0, 1.0);
  return total;
}

std::vector<Trajectory> all_sequences(int horizon, int num_obs, int num_actions) {
  std::vector<Trajectory> out;
  long long count = 1;
  for (int k = 0; k < horizon; ++k) count *= static_cast<long long>(num_obs) * num_actions;
  for (long long code = 0; code < count; ++code) {
    Trajectory tau;
    tau.observations.assign(horizon + 1, num_obs);
    tau.actions.assign(horizon, 0);
    tau.rewards.assign(horizon, 0.0);
    long long rest = code;
    for (int k = horizon - 1; k >= 0; --k) {
      tau.actions[k] = static_cast<int>(rest % num_actions);
      rest /= num_actions;
      tau.observations[k] = static_cast<int>(rest % num_obs);
      rest /= num_obs;
    }
    out.push_back(std::move(tau));
  }
  return out;
}

double latent_path_policy_value(const TabularPOMDP& pomdp, const HistoryPolicy& policy) {
  double value = 0.0;
  for (const auto& tau : all_sequences(pomdp.horizon(), pomdp.num_observations(), pomdp.num_actions())) {
    double pi = 1.0;
    double ret = 0.0;
    for (int k = 0; k < tau.horizon() && pi > 0.0; ++k) {
      const HistoryView view{std::span<const int>(tau.observations.data(), k + 1),
                             std::span<const int>(tau.actions.data(), k)};
      pi *= policy.distribution(view)[tau.actions[k]];
      ret += pomdp.reward(k, tau.observations[k], tau.actions[k]);
    }
    if (pi == 0.0) continue;
    value += pi * latent_path_probability(pomdp, tau) * ret;
  }
  return value;
}

double brute_force_history_value(const TabularPOMDP& pomdp) {
  const int horizon = pomdp.horizon(), num_obs = pomdp.num_observations(), num_actions = pomdp.num_actions();
  std::vector<std::int64_t> rows;
  std::int64_t nodes = 0;
  for (int k = 0; k < horizon; ++k) {
    rows.push_back(memory_context_count(k, horizon, num_obs, num_actions));
    nodes += rows.back();
  }
  if (std::pow(static_cast<double>(num_actions), static_cast<double>(nodes)) > 1e5) {
    throw CapacityError("brute_force_history_value: too many policies");
  }
  std::vector<int> choice(nodes, 0);
  double best = -1.0;
  for (;;) {
    std::vector<Eigen::MatrixXd> tables;
    std::int64_t offset = 0;
    for (int k = 0; k < horizon; ++k) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows[k], num_actions);
      for (std::int64_t r = 0; r < rows[k]; ++r) t(r, choice[offset + r]) = 1.0;
      offset += rows[k];
      tables.push_back(std::move(t));
    }
    const HistoryPolicy p = HistoryPolicy::memory(horizon, num_obs, num_actions, std::move(tables));
    best = std::max(best, latent_path_policy_value(pomdp, p));
    std::int64_t i = 0;
    while (i < nodes && ++choice[i] == num_actions) choice[i++] = 0;
    if (i == nodes) break;
  }
  return best;
}

Eigen::VectorXd joint_value_posterior(const LayeredValueClass& cls, const std::vector<LedgerEntry>& entries,
                                      const Eigen::VectorXd& mu, double gamma, double eta) {
  const int horizon = cls.horizon();
  std::vector<int> sizes;
  std::int64_t total = 1;
  for (const auto& layer : cls.layers) {
    sizes.push_back(static_cast<int>(layer.size()));
    total *= static_cast<std::int64_t>(layer.size());
  }
  // Squared loss of the pair (layer k member i, layer k+1 member j) on one tuple.
  auto sq = [&](int k, int i, int j, const Trajectory& tau) {
    const int x = tau.observations[k], a = tau.actions[k], xn = tau.observations[k + 1];
    double v_next = 0.0;
    if (k + 1 < horizon) v_next = cls.layers[k + 1][j].row(xn).maxCoeff();
    const double e = cls.layers[k][i](x, a) - tau.rewards[k] - v_next;
    return e * e;
  };
  auto loss = [&](int k, int i, int j) {
    double s = 0.0;
    for (const auto& entry : entries) {
      if (entry.stage - 1 != k) continue;
      for (const auto& tau : entry.samples) s += sq(k, i, j, tau);
    }
    return s;
  };
  // log Z_k(j) = log sum_i p0_k(i) exp(-eta * loss_k(i, j)).
  std::vector<std::vector<double>> log_z(horizon);
  for (int k = 0; k + 1 < horizon; ++k) {
    for (int j = 0; j < sizes[k + 1]; ++j) {
      double z = 0.0;
      for (int i = 0; i < sizes[k]; ++i) z += cls.layer_priors[k][i] * std::exp(-eta * loss(k, i, j));
      log_z[k].push_back(std::log(z));
    }
  }
  Eigen::VectorXd logw(total);
  std::vector<int> f(horizon);
  for (std::int64_t code = 0; code < total; ++code) {
    std::int64_t rest = code;
    for (int k = horizon - 1; k >= 0; --k) {
      f[k] = static_cast<int>(rest % sizes[k]);
      rest /= sizes[k];
    }
    double w = gamma * mu.dot(cls.layers[0][f[0]].rowwise().maxCoeff());
    for (int k = 0; k < horizon; ++k) {
      w += std::log(cls.layer_priors[k][f[k]]);
      w -= eta * loss(k, f[k], k + 1 < horizon ? f[k + 1] : 0);
      if (k + 1 < horizon) w -= log_z[k][f[k + 1]];
    }
    logw[code] = w;
  }
  const double m = logw.maxCoeff();
  Eigen::VectorXd p = (logw.array() - m).exp();
  return p / p.sum();
}

int brute_force_de_dimension(const Eigen::MatrixXd& expectations, double eps) {
  const int n = static_cast<int>(expectations.cols());
  const Eigen::Index g_count = expectations.rows();
  if (n > 8) throw CapacityError("brute_force_de_dimension: too many measures");
  // Any feasible threshold set is a union of [lower, upper) pieces, so it
  // contains eps or one of the prefix norms.
  std::vector<double> candidates{eps};
  for (int mask = 1; mask < (1 << n); ++mask) {
    for (Eigen::Index g = 0; g < g_count; ++g) {
      double s = 0.0;
      for (int b = 0; b < n; ++b) {
        if (mask >> b & 1) s += expectations(g, b) * expectations(g, b);
      }
      if (std::sqrt(s) >= eps) candidates.push_back(std::sqrt(s));
    }
  }
  int best = 0;
  std::vector<int> seq;
  std::vector<bool> used(n, false);
  for (double thr : candidates) {
    std::function<void()> dfs = [&]() {
      best = std::max(best, static_cast<int>(seq.size()));
      for (int r = 0; r < n; ++r) {
        if (used[r]) continue;
        bool independent = false;
        for (Eigen::Index g = 0; g < g_count && !independent; ++g) {
          double s = 0.0;
          for (int prev : seq) s += expectations(g, prev) * expectations(g, prev);
          independent = std::sqrt(s) <= thr && std::abs(expectations(g, r)) > thr;
        }
        if (!independent) continue;
        used[r] = true;
        seq.push_back(r);
        dfs();
        seq.pop_back();
        used[r] = false;
      }
    };
    dfs();
  }
  return best;
}

}  // namespace geclab::oracle
