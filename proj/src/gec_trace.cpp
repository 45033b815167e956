#include "geclab/gec_trace.hpp"

#include <cmath>
#include <map>

#include "geclab/divergences.hpp"
#include "geclab/errors.hpp"
#include "geclab/planning.hpp"
#include "geclab/simulate.hpp"

namespace geclab {
namespace {

// Action law of a Markov-in-state policy at (k, x).
Eigen::VectorXd markov_action(const HistoryPolicy& policy, int step, int state) {
  std::vector<int> obs(step + 1, 0), acts(step, 0);
  obs[step] = state;
  return policy.distribution(HistoryView{obs, acts});
}

// occ[k](x, a) under `base`, with a uniform action at step `uniform_step` (-1 for none).
std::vector<Eigen::MatrixXd> occupancy(const TabularMDP& env, const HistoryPolicy& base, int uniform_step) {
  const int horizon = env.horizon(), states = env.num_states(), actions = env.num_actions();
  std::vector<Eigen::MatrixXd> occ;
  Eigen::VectorXd d = env.initial();
  for (int k = 0; k < horizon; ++k) {
    Eigen::MatrixXd m(states, actions);
    for (int x = 0; x < states; ++x) {
      const Eigen::VectorXd pa =
          k == uniform_step ? Eigen::VectorXd::Constant(actions, 1.0 / actions) : markov_action(base, k, x);
      m.row(x) = d[x] * pa.transpose();
    }
    Eigen::VectorXd next = Eigen::VectorXd::Zero(states);
    for (int x = 0; x < states; ++x) {
      for (int a = 0; a < actions; ++a) next += m(x, a) * env.transition(k, a).col(x);
    }
    occ.push_back(std::move(m));
    d = std::move(next);
  }
  return occ;
}

double dot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a.array() * b.array()).sum(); }

// Common driver: training[t][h] = sum_{s<t} <occ_{f^s, h}, loss_{f^t, h}>.
template <class OccFn, class LossFn>
GecTrace occupancy_trace(const RunResult& run, int stages, OccFn occ_of, LossFn loss_of) {
  GecTrace trace;
  std::vector<Eigen::MatrixXd> cumulative;
  for (std::size_t t = 0; t < run.records.size(); ++t) {
    const auto& rec = run.records[t];
    trace.prediction.push_back(rec.v_pred - rec.v_realized);
    const std::vector<Eigen::MatrixXd>& loss = loss_of(run.sampled[t]);
    std::vector<double> row(stages, 0.0);
    if (!cumulative.empty()) {
      for (int h = 0; h < stages; ++h) row[h] = dot(cumulative[h], loss[h]);
    }
    trace.training.push_back(std::move(row));
    const std::vector<Eigen::MatrixXd>& occ = occ_of(run.sampled[t]);
    if (cumulative.empty()) {
      cumulative = occ;
    } else {
      for (int h = 0; h < stages; ++h) cumulative[h] += occ[h];
    }
  }
  return trace;
}

}  // namespace

GecTrace model_based_gec_trace(const TabularMDP& env, const ModelClass& cls, const RunResult& run) {
  const int horizon = env.horizon(), states = env.num_states(), actions = env.num_actions();
  std::map<int, std::vector<Eigen::MatrixXd>> occ_cache, loss_cache;
  auto occ_of = [&](const std::vector<int>& idx) -> const std::vector<Eigen::MatrixXd>& {
    auto it = occ_cache.find(idx[0]);
    if (it != occ_cache.end()) return it->second;
    // Stage h uses the occupancy at step h - 1 of pi_f itself.
    return occ_cache.emplace(idx[0], occupancy(env, cls.members[idx[0]].policy, -1)).first->second;
  };
  auto loss_of = [&](const std::vector<int>& idx) -> const std::vector<Eigen::MatrixXd>& {
    auto it = loss_cache.find(idx[0]);
    if (it != loss_cache.end()) return it->second;
    const auto* mdp = std::get_if<TabularMDP>(&cls.members[idx[0]].model);
    if (!mdp) throw ConfigError("model-based trace needs MDP hypotheses");
    std::vector<Eigen::MatrixXd> loss;
    for (int k = 0; k < horizon; ++k) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(states, actions);
      if (k + 1 < horizon) {
        for (int x = 0; x < states; ++x) {
          for (int a = 0; a < actions; ++a) {
            m(x, a) = hellinger_squared(mdp->transition(k, a).col(x), env.transition(k, a).col(x));
          }
        }
      }
      loss.push_back(std::move(m));
    }
    return loss_cache.emplace(idx[0], std::move(loss)).first->second;
  };
  GecTrace trace = occupancy_trace(run, horizon, occ_of, loss_of);
  trace.discrepancy_kind = "hellinger-transition";
  return trace;
}

GecTrace model_free_gec_trace(const TabularMDP& env, const LayeredValueClass& cls, const RunResult& run,
                              ExplorationKind explore) {
  const int horizon = env.horizon();
  std::map<std::vector<int>, std::vector<Eigen::MatrixXd>> occ_cache, loss_cache;
  auto occ_of = [&](const std::vector<int>& idx) -> const std::vector<Eigen::MatrixXd>& {
    auto it = occ_cache.find(idx);
    if (it != occ_cache.end()) return it->second;
    const HistoryPolicy base = cls.hypothesis(idx).policy();
    std::vector<Eigen::MatrixXd> occ;
    for (int k = 0; k < horizon; ++k) {
      const int uniform_step = explore == ExplorationKind::kVType ? k : -1;
      occ.push_back(occupancy(env, base, uniform_step)[k]);
    }
    return occ_cache.emplace(idx, std::move(occ)).first->second;
  };
  auto loss_of = [&](const std::vector<int>& idx) -> const std::vector<Eigen::MatrixXd>& {
    auto it = loss_cache.find(idx);
    if (it != loss_cache.end()) return it->second;
    std::vector<Eigen::MatrixXd> res = bellman_residuals(env, cls.hypothesis(idx).q);
    for (auto& m : res) m = m.cwiseAbs2();
    return loss_cache.emplace(idx, std::move(res)).first->second;
  };
  GecTrace trace = occupancy_trace(run, horizon, occ_of, loss_of);
  trace.discrepancy_kind = "squared-bellman-residual";
  return trace;
}

GecTrace psr_gec_trace(const Model& env, const ModelClass& cls, const RunResult& run, const CoreTestSet& core,
                       std::int64_t exact_cap, int mc_samples, std::uint64_t seed) {
  const int horizon = model_horizon(env), num_obs = model_observations(env), num_actions = model_actions(env);
  const int n = cls.size();
  // table[i][j][h] = D_H^2 between member j and the truth under pi_exp(f_i, h).
  std::vector<std::vector<std::vector<double>>> table(n, std::vector<std::vector<double>>(n, std::vector<double>(horizon, 0.0)));
  std::vector<bool> used(n, false);
  for (const auto& s : run.sampled) used[s[0]] = true;

  double count = 1.0;
  for (int k = 0; k < horizon; ++k) count *= static_cast<double>(num_obs) * num_actions;
  GecTrace trace;
  trace.discrepancy_kind = "hellinger-trajectory";
  auto exploration = [&](int i, int h) {
    return compose_exploration(cls.members[i].policy, h, ExplorationKind::kPsrType, core.action_sequences(h));
  };

  if (count <= static_cast<double>(exact_cap)) {
    // Dynamics factors are policy-free; enumerate every sequence once.
    const auto total = static_cast<std::int64_t>(count);
    std::vector<Trajectory> all;
    all.reserve(total);
    for (std::int64_t code = 0; code < total; ++code) {
      Trajectory tau;
      tau.observations.assign(horizon + 1, num_obs);
      tau.actions.assign(horizon, 0);
      tau.rewards.assign(horizon, 0.0);
      std::int64_t rest = code;
      for (int k = horizon - 1; k >= 0; --k) {
        tau.actions[k] = static_cast<int>(rest % num_actions);
        rest /= num_actions;
        tau.observations[k] = static_cast<int>(rest % num_obs);
        rest /= num_obs;
      }
      all.push_back(std::move(tau));
    }
    std::vector<double> truth_sqrt(total);
    for (std::int64_t c = 0; c < total; ++c) truth_sqrt[c] = std::sqrt(std::max(0.0, model_trajectory_probability(env, all[c])));
    std::vector<std::vector<double>> member_sqrt(n, std::vector<double>(total));
    for (int j = 0; j < n; ++j) {
      for (std::int64_t c = 0; c < total; ++c) {
        member_sqrt[j][c] = std::sqrt(std::max(0.0, model_trajectory_probability(cls.members[j].model, all[c])));
      }
    }
    for (int i = 0; i < n; ++i) {
      if (!used[i]) continue;
      for (int h = 0; h < horizon; ++h) {
        const HistoryPolicy pi = exploration(i, h);
        std::vector<double> weight(total);
        for (std::int64_t c = 0; c < total; ++c) weight[c] = policy_probability(pi, all[c]);
        for (int j = 0; j < n; ++j) {
          double d = 0.0;
          for (std::int64_t c = 0; c < total; ++c) {
            if (weight[c] == 0.0) continue;
            const double diff = member_sqrt[j][c] - truth_sqrt[c];
            d += weight[c] * diff * diff;
          }
          table[i][j][h] = 0.5 * d;
        }
      }
    }
  } else {
    // D_H^2 = 1 - E_{tau ~ P_*}[sqrt(P_j(tau) / P_*(tau))], estimated from truth samples.
    SeededSampler sampler(seed, 7);
    for (int i = 0; i < n; ++i) {
      if (!used[i]) continue;
      for (int h = 0; h < horizon; ++h) {
        const HistoryPolicy pi = exploration(i, h);
        std::vector<std::vector<double>> ratios(n);
        for (int b = 0; b < mc_samples; ++b) {
          Trajectory tau = std::visit(
              [&](const auto& m) {
                CounterRng rng = sampler.next_episode();
                return sample_from_model(m, pi, rng);
              },
              env);
          const double p_star = model_trajectory_probability(env, tau);
          for (int j = 0; j < n; ++j) {
            const double p_j = std::max(0.0, model_trajectory_probability(cls.members[j].model, tau));
            ratios[j].push_back(p_star > 0.0 ? std::sqrt(p_j / p_star) : 0.0);
          }
        }
        for (int j = 0; j < n; ++j) {
          double mean = 0.0, sq = 0.0;
          for (double r : ratios[j]) mean += r;
          mean /= mc_samples;
          for (double r : ratios[j]) sq += (r - mean) * (r - mean);
          const double stderr_ = std::sqrt(sq / std::max(1, mc_samples - 1) / mc_samples);
          table[i][j][h] = std::max(0.0, 1.0 - mean);
          trace.mc_tolerance = std::max(trace.mc_tolerance, stderr_);
        }
      }
    }
  }

  std::vector<int> counts(n, 0);
  for (std::size_t t = 0; t < run.records.size(); ++t) {
    const auto& rec = run.records[t];
    trace.prediction.push_back(rec.v_pred - rec.v_realized);
    const int j = run.sampled[t][0];
    std::vector<double> row(horizon, 0.0);
    for (int i = 0; i < n; ++i) {
      if (counts[i] == 0) continue;
      for (int h = 0; h < horizon; ++h) row[h] += counts[i] * table[i][j][h];
    }
    trace.training.push_back(std::move(row));
    ++counts[j];
  }
  return trace;
}

}  // namespace geclab
