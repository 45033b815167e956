#include "geclab/agents.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "geclab/complexity.hpp"
#include "geclab/errors.hpp"
#include "geclab/planning.hpp"
#include "geclab/psr_certify.hpp"
#include "geclab/simulate.hpp"

namespace geclab {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kSelectionStream = 1;
constexpr std::uint64_t kEnvironmentStream = 2;

Trajectory sample_env(const Model& env, const HistoryPolicy& policy, SeededSampler& sampler) {
  return std::visit(
      [&](const auto& m) -> Trajectory {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OperatorPsr>) {
          CounterRng rng = sampler.next_episode();
          return sample_from_model(m, policy, rng);
        } else {
          return sample_episode(m, policy, sampler);
        }
      },
      env);
}

// Value of the planned optimal policy, scored by the same evaluator as the
// realized policies so that picking the optimum gives exactly zero regret.
double optimal_value(const Model& env) {
  if (const auto* mdp = std::get_if<TabularMDP>(&env)) return model_policy_value(env, plan_mdp(*mdp).policy);
  return std::visit([&](const auto& m) { return model_policy_value(env, plan_history_tree(m).policy); }, env);
}

// V* >= V^pi; anything below zero is rounding between tied optimal policies.
double episode_regret(double v_star, double v_realized) { return std::max(0.0, v_star - v_realized); }

HistoryView view_at(const Trajectory& tau, int step) {
  return HistoryView{std::span<const int>(tau.observations.data(), step + 1),
                     std::span<const int>(tau.actions.data(), step)};
}

Eigen::VectorXd log_of(const Eigen::VectorXd& p) {
  Eigen::VectorXd out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) out[i] = p[i] > 0.0 ? std::log(p[i]) : kNegInf;
  return out;
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

void mark_eliminated(LossLedger& ledger, int i) {
  for (int e : ledger.eliminated) {
    if (e == i) return;
  }
  ledger.eliminated.push_back(i);
}

PosteriorState joint_state(Eigen::VectorXd log_weights, double gamma, double eta) {
  PosteriorState s;
  s.form = PosteriorForm::kJoint;
  s.gamma = gamma;
  s.eta = eta;
  s.log_weights = std::move(log_weights);
  return s;
}

// Shared joint posterior: log p0 + gamma V + eta * score, with score ignored at eta = 0.
PosteriorState exponential_weights(const Eigen::VectorXd& prior, const Eigen::VectorXd& values,
                                   const Eigen::VectorXd& score, double gamma, double eta) {
  Eigen::VectorXd w = log_of(prior);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (gamma != 0.0) w[i] += gamma * values[i];
    if (eta != 0.0) w[i] += eta * score[i];
  }
  return joint_state(std::move(w), gamma, eta);
}

double normalization_error(const PosteriorState& post) {
  double err = 0.0;
  for (const auto& m : post.marginals()) err = std::max(err, std::abs(m.sum() - 1.0));
  return err;
}

double default_gamma(double class_size, int rounds, double d) {
  if (!(d > 0.0) || class_size <= 1.0) return 0.0;
  return 2.0 * std::sqrt(std::log(class_size) * rounds / d);
}

int uniform_index(CounterRng& rng, std::int64_t n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }

// Runs body(t) for t = 0..rounds-1 and tags library errors with the episode.
template <class Body>
void for_each_round(int rounds, Body body) {
  int t = 0;
  try {
    for (; t < rounds; ++t) body(t);
  } catch (const RunError&) {
    throw;
  } catch (const Error& e) {
    std::ostringstream msg;
    msg << "episode " << t + 1 << ": " << e.what();
    throw RunError(msg.str(), t + 1);
  }
}

}  // namespace

AgentKind parse_agent_kind(const std::string& name) {
  if (name == "model-free") return AgentKind::kModelFree;
  if (name == "model-based") return AgentKind::kModelBased;
  if (name == "psr") return AgentKind::kPsr;
  if (name == "po-bilinear") return AgentKind::kPoBilinear;
  throw ConfigError("unknown agent kind '" + name + "' (model-free, model-based, psr, po-bilinear)");
}

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kModelFree: return "model-free";
    case AgentKind::kModelBased: return "model-based";
    case AgentKind::kPsr: return "psr";
    case AgentKind::kPoBilinear: return "po-bilinear";
  }
  return "unknown";
}

Transition transition_at(const Trajectory& tau, int step) {
  if (step < 0 || step >= tau.horizon()) throw ModelError("transition step out of range");
  return Transition{step, tau.observations[step], tau.actions[step], tau.rewards[step],
                    tau.observations[step + 1]};
}

double bellman_error(const Eigen::MatrixXd& q, const Eigen::MatrixXd* next, const Transition& z) {
  const double v_next = next ? next->row(z.next_state).maxCoeff() : 0.0;
  return q(z.state, z.action) - z.reward - v_next;
}

double bellman_error(const ValueHypothesis& f, const Transition& z) {
  const bool last = z.step + 1 >= static_cast<int>(f.q.size());
  return bellman_error(f.q[z.step], last ? nullptr : &f.q[z.step + 1], z);
}

double pobilinear_loss(int num_actions, double action_prob, double reward, double g_next, double g_now) {
  return num_actions * action_prob * (reward + g_next) - g_now;
}

double pobilinear_loss(const PoBilinearHypothesis& f, const Trajectory& tau, int step) {
  const int num_obs = f.policy.num_observations();
  const int num_actions = f.policy.num_actions();
  const int memory = f.link.memory;
  const HistoryView now = view_at(tau, step);
  const double prob = f.policy.distribution(now)[tau.actions[step]];
  const double g_now = f.link.at(step, memory_context_code(now, memory, num_obs, num_actions));
  double g_next = 0.0;
  if (step + 1 < tau.horizon()) {
    g_next = f.link.at(step + 1, memory_context_code(view_at(tau, step + 1), memory, num_obs, num_actions));
  }
  return pobilinear_loss(num_actions, prob, tau.rewards[step], g_next, g_now);
}

LossLedger make_model_ledger(int class_size) {
  LossLedger l;
  l.log_likelihood = Eigen::VectorXd::Zero(class_size);
  return l;
}

LossLedger make_value_ledger(const LayeredValueClass& cls) {
  LossLedger l;
  const int h = cls.horizon();
  for (int k = 0; k + 1 < h; ++k) {
    l.pair_loss.push_back(Eigen::MatrixXd::Zero(cls.layers[k].size(), cls.layers[k + 1].size()));
  }
  l.last_loss = Eigen::VectorXd::Zero(cls.layers[h - 1].size());
  return l;
}

LossLedger make_pobilinear_ledger(int class_size) {
  LossLedger l;
  l.squared_batch_loss = Eigen::VectorXd::Zero(class_size);
  return l;
}

void accumulate_model_based(LossLedger& ledger, const ModelClass& cls, LedgerEntry entry) {
  const int k = entry.stage - 1;
  for (const auto& tau : entry.samples) {
    if (k < 0 || k >= tau.horizon()) throw ModelError("model-based stage out of range");
    // The state after the last step is the dummy index and carries no transition.
    if (k + 1 >= tau.horizon()) continue;
    const Transition z = transition_at(tau, k);
    for (int i = 0; i < cls.size(); ++i) {
      const auto* mdp = std::get_if<TabularMDP>(&cls.members[i].model);
      if (!mdp) throw ConfigError("model-based agent needs MDP hypotheses");
      const double p = mdp->transition(k, z.action)(z.next_state, z.state);
      const double lp = safe_log(p);
      if (!std::isfinite(lp)) mark_eliminated(ledger, i);
      ledger.log_likelihood[i] += lp;
    }
  }
  ledger.entries.push_back(std::move(entry));
}

void accumulate_psr(LossLedger& ledger, const ModelClass& cls, LedgerEntry entry) {
  for (const auto& tau : entry.samples) {
    for (int i = 0; i < cls.size(); ++i) {
      const double lp = safe_log(model_trajectory_probability(cls.members[i].model, tau));
      if (!std::isfinite(lp)) mark_eliminated(ledger, i);
      ledger.log_likelihood[i] += lp;
    }
  }
  ledger.entries.push_back(std::move(entry));
}

void accumulate_model_free(LossLedger& ledger, const LayeredValueClass& cls, LedgerEntry entry) {
  const int h = cls.horizon();
  const int k = entry.stage - 1;
  for (const auto& tau : entry.samples) {
    const Transition z = transition_at(tau, k);
    const auto& layer = cls.layers[k];
    if (k + 1 < h) {
      const auto& next = cls.layers[k + 1];
      for (std::size_t i = 0; i < layer.size(); ++i) {
        for (std::size_t j = 0; j < next.size(); ++j) {
          const double e = bellman_error(layer[i], &next[j], z);
          ledger.pair_loss[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += e * e;
        }
      }
    } else {
      for (std::size_t i = 0; i < layer.size(); ++i) {
        const double e = bellman_error(layer[i], nullptr, z);
        ledger.last_loss[static_cast<Eigen::Index>(i)] += e * e;
      }
    }
  }
  ledger.entries.push_back(std::move(entry));
}

void accumulate_pobilinear(LossLedger& ledger, const HypothesisClass<PoBilinearHypothesis>& cls,
                           LedgerEntry entry, int n_batch) {
  if (static_cast<int>(entry.samples.size()) < n_batch) {
    std::ostringstream msg;
    msg << "po-bilinear batch holds " << entry.samples.size() << " samples, expected " << n_batch;
    throw ModelError(msg.str());
  }
  const int k = entry.stage - 1;
  for (int i = 0; i < cls.size(); ++i) {
    double mean = 0.0;
    for (const auto& tau : entry.samples) mean += pobilinear_loss(cls.members[i], tau, k);
    mean /= static_cast<double>(entry.samples.size());
    ledger.squared_batch_loss[i] += mean * mean;
  }
  ledger.entries.push_back(std::move(entry));
}

PosteriorState model_based_posterior_update(const LossLedger& ledger, const ModelClass& cls, double gamma,
                                            double eta) {
  Eigen::VectorXd values(cls.size());
  for (int i = 0; i < cls.size(); ++i) values[i] = cls.members[i].value;
  return exponential_weights(cls.prior, values, ledger.log_likelihood, gamma, eta);
}

PosteriorState psr_posterior_update(const LossLedger& ledger, const ModelClass& cls, double gamma,
                                    double eta) {
  return model_based_posterior_update(ledger, cls, gamma, eta);
}

PosteriorState pobilinear_posterior_update(const LossLedger& ledger,
                                           const HypothesisClass<PoBilinearHypothesis>& cls, double gamma,
                                           double eta) {
  Eigen::VectorXd values(cls.size());
  for (int i = 0; i < cls.size(); ++i) values[i] = cls.members[i].value;
  return exponential_weights(cls.prior, values, -ledger.squared_batch_loss, gamma, eta);
}

PosteriorState model_free_posterior_update(const LossLedger& ledger, const LayeredValueClass& cls,
                                           const Eigen::VectorXd& mu, double gamma, double eta,
                                           std::int64_t joint_cap) {
  const int h = cls.horizon();
  std::vector<Eigen::VectorXd> log_prior;
  for (const auto& p : cls.layer_priors) log_prior.push_back(log_of(p));
  // Per-step pair potentials with the layer normalizer over f_k for fixed f_{k+1}.
  std::vector<Eigen::MatrixXd> pair(h > 0 ? h - 1 : 0);
  for (int k = 0; k + 1 < h; ++k) {
    const Eigen::MatrixXd& s = ledger.pair_loss[k];
    Eigen::MatrixXd p(s.rows(), s.cols());
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      Eigen::VectorXd col = log_prior[k];
      if (eta != 0.0) col -= eta * s.col(j);
      p.col(j) = col.array() - log_sum_exp(col);
    }
    pair[k] = std::move(p);
  }
  Eigen::VectorXd last = log_prior[h - 1];
  if (eta != 0.0) last -= eta * ledger.last_loss;
  Eigen::VectorXd first = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cls.layers[0].size()));
  if (gamma != 0.0) {
    for (std::size_t i = 0; i < cls.layers[0].size(); ++i) {
      first[static_cast<Eigen::Index>(i)] = gamma * mu.dot(cls.layers[0][i].rowwise().maxCoeff());
    }
  }
  if (cls.factored()) {
    PosteriorState s;
    s.form = PosteriorForm::kChain;
    s.gamma = gamma;
    s.eta = eta;
    s.first_log = std::move(first);
    s.pair_log = std::move(pair);
    s.last_log = std::move(last);
    return s;
  }
  if (static_cast<std::int64_t>(cls.support.size()) > joint_cap) {
    std::ostringstream msg;
    msg << "value class support of " << cls.support.size() << " exceeds the joint cap " << joint_cap;
    throw CapacityError(msg.str());
  }
  // Explicit support: the layer priors only enter through the normalizers.
  Eigen::VectorXd w = log_of(cls.support_prior);
  for (std::size_t n = 0; n < cls.support.size(); ++n) {
    const auto& f = cls.support[n];
    double v = first[f[0]];
    for (int k = 0; k + 1 < h; ++k) v += pair[k](f[k], f[k + 1]) - log_prior[k][f[k]];
    v += last[f[h - 1]] - log_prior[h - 1][f[h - 1]];
    w[static_cast<Eigen::Index>(n)] += v;
  }
  return joint_state(std::move(w), gamma, eta);
}

Tuning resolve_tuning(const AgentConfig& cfg, int class_size, int horizon, int num_obs, int num_actions,
                      int num_states, double psr_d) {
  Tuning t;
  const int rounds = cfg.rounds;
  switch (cfg.kind) {
    case AgentKind::kModelBased: {
      t.eta = cfg.eta.value_or(0.5);
      const double eps = 1.0 / (horizon * std::sqrt(static_cast<double>(rounds)));
      t.d_gec = cfg.d_gec.value_or(witness_gec_bound(static_cast<double>(num_states) * num_actions, horizon,
                                                     rounds, eps, 1.0));
      t.gamma = cfg.gamma.value_or(default_gamma(class_size, rounds, t.d_gec));
      break;
    }
    case AgentKind::kPsr: {
      t.eta = cfg.eta.value_or(0.5);
      t.d_gec = cfg.d_gec.value_or(psr_d);
      t.gamma = cfg.gamma.value_or(default_gamma(class_size, rounds, t.d_gec));
      break;
    }
    case AgentKind::kModelFree: {
      constexpr double kLossBound = 2.0;
      t.eta = cfg.eta.value_or(3.0 / (10.0 * kLossBound * kLossBound));
      t.d_gec = cfg.d_gec.value_or(be_gec_bound(static_cast<double>(num_states) * num_actions, horizon, rounds));
      double g = 0.0;
      if (t.d_gec > 0.0 && class_size > 1) {
        g = std::sqrt(rounds * std::log(static_cast<double>(class_size)) / (kLossBound * kLossBound * t.d_gec));
      }
      t.gamma = cfg.gamma.value_or(g);
      break;
    }
    case AgentKind::kPoBilinear: {
      const double k = rounds;
      const double log_h = std::log(std::max(1, class_size));
      t.d_gec = cfg.d_gec.value_or(static_cast<double>(num_obs) * num_actions);
      t.eta = cfg.eta.value_or(std::cbrt(k) * log_h);
      t.gamma = cfg.gamma.value_or(std::cbrt(k) * log_h);
      const double iota = std::log(std::max(1, class_size) * horizon * k * k);
      const double a = num_actions;
      const double n = std::cbrt(a * a * iota / (t.d_gec * horizon)) * std::pow(k, 2.0 / 3.0);
      t.n_batch = cfg.n_batch.value_or(std::max(1, static_cast<int>(std::lround(n))));
      if (t.n_batch < 1) throw ConfigError("n_batch must be at least 1");
      t.iterations = std::max(1, static_cast<int>(std::lround(k / (t.n_batch * horizon))));
      break;
    }
  }
  return t;
}

CoreTestSet psr_exploration_core(const ModelClass& cls, int psr_core_steps) {
  const Model& truth = cls.members.at(cls.truth).model;
  if (const auto* psr = std::get_if<OperatorPsr>(&truth)) return psr->core();
  return CoreTestSet::m_step(model_horizon(truth), psr_core_steps, model_observations(truth),
                             model_actions(truth));
}

double psr_default_d(const ModelClass& cls, int rounds) {
  const Model& truth = cls.members.at(cls.truth).model;
  try {
    PsrCertificate cert;
    int u_a = 1;
    if (const auto* psr = std::get_if<OperatorPsr>(&truth)) {
      cert = certify_psr(*psr);
      u_a = psr->core().max_action_sequences();
    } else {
      const TabularPOMDP pomdp =
          std::holds_alternative<TabularMDP>(truth) ? as_pomdp(std::get<TabularMDP>(truth)) : std::get<TabularPOMDP>(truth);
      const OperatorPsr embedded = psr_from_weakly_revealing_pomdp(pomdp, 1);
      cert = certify_psr(embedded, &pomdp);
      u_a = embedded.core().max_action_sequences();
    }
    if (!(cert.alpha_generalized > 0.0)) throw RankError("truth is not generalized regular", 0.0);
    return psr_gec_bound(cert.rank, model_actions(truth), u_a, model_horizon(truth), rounds,
                         cert.alpha_generalized, cert.delta_bound);
  } catch (const RankError& e) {
    throw ConfigError(std::string("cannot certify the truth member for the default psr tuning (") + e.what() +
                      "); set gamma or d_gec");
  }
}

namespace {

// Shared loop of the joint-posterior model agents.
template <class Update, class Accumulate>
RunResult run_joint_models(const Model& env, const ModelClass& cls, const AgentConfig& cfg, const Tuning& tuning,
                           int first_stage, int last_stage, ExplorationKind explore,
                           const std::function<std::vector<std::vector<int>>(int)>& sequences, Update update,
                           Accumulate accumulate) {
  validate_prior(cls.prior, cls.size(), cls.truth);
  RunResult out;
  out.gamma = tuning.gamma;
  out.eta = tuning.eta;
  out.d_gec = tuning.d_gec;
  out.stages = last_stage - first_stage + 1;
  out.v_star = optimal_value(env);
  LossLedger ledger = make_model_ledger(cls.size());
  SeededSampler select(cfg.seed, kSelectionStream);
  SeededSampler envs(cfg.seed, kEnvironmentStream);
  std::vector<double> realized(cls.size(), std::numeric_limits<double>::quiet_NaN());
  double cum = 0.0;
  for_each_round(cfg.rounds, [&](int t) {
    const PosteriorState post = update(ledger, cls, tuning.gamma, tuning.eta);
    const Eigen::VectorXd probs = post.probabilities();
    out.max_normalization_error = std::max(out.max_normalization_error, std::abs(probs.sum() - 1.0));
    CounterRng rng = select.next_episode();
    const int i = cfg.uniform_selection ? uniform_index(rng, cls.size()) : post.sample(rng)[0];
    const auto& f = cls.members[i];
    if (std::isnan(realized[i])) realized[i] = model_policy_value(env, f.policy);
    RegretRecord rec;
    rec.t = t + 1;
    rec.hypothesis_index = i;
    rec.v_pred = f.value;
    rec.v_realized = realized[i];
    rec.regret_step = episode_regret(out.v_star, realized[i]);
    cum += rec.regret_step;
    rec.regret_cum = cum;
    rec.mass_on_truth = probs[cls.truth];
    for (int h = first_stage; h <= last_stage; ++h) {
      const HistoryPolicy pi = compose_exploration(f.policy, h, explore, sequences(h));
      LedgerEntry entry{t, h, i, {sample_env(env, pi, envs)}};
      accumulate(ledger, cls, std::move(entry));
    }
    out.records.push_back(rec);
    out.sampled.push_back({i});
  });
  out.eliminated = ledger.eliminated;
  if (cfg.keep_ledger) out.ledger = std::move(ledger);
  return out;
}

}  // namespace

RunResult run_model_based(const Model& env, const ModelClass& cls, const AgentConfig& cfg) {
  const auto* mdp = std::get_if<TabularMDP>(&env);
  if (!mdp) throw ConfigError("model-based agent needs an MDP environment");
  const int horizon = mdp->horizon();
  const Tuning tuning =
      resolve_tuning(cfg, cls.size(), horizon, mdp->num_states(), mdp->num_actions(), mdp->num_states());
  return run_joint_models(
      env, cls, cfg, tuning, 1, horizon, ExplorationKind::kQType, [](int) { return std::vector<std::vector<int>>{}; },
      model_based_posterior_update, accumulate_model_based);
}

RunResult run_psr(const Model& env, const ModelClass& cls, const AgentConfig& cfg) {
  const int horizon = model_horizon(env);
  double psr_d = 0.0;
  if (!cfg.d_gec && !cfg.gamma) psr_d = psr_default_d(cls, cfg.rounds);
  const Tuning tuning = resolve_tuning(cfg, cls.size(), horizon, model_observations(env), model_actions(env),
                                       model_observations(env), psr_d);
  const CoreTestSet core = psr_exploration_core(cls, cfg.psr_core_steps);
  return run_joint_models(
      env, cls, cfg, tuning, 0, horizon - 1, ExplorationKind::kPsrType,
      [&core](int h) { return core.action_sequences(h); }, psr_posterior_update, accumulate_psr);
}

namespace {

std::int64_t flatten_index(const LayeredValueClass& cls, std::span<const int> idx) {
  std::int64_t code = 0;
  for (int k = 0; k < cls.horizon(); ++k) code = code * static_cast<std::int64_t>(cls.layers[k].size()) + idx[k];
  return code;
}

}  // namespace

RunResult run_model_free(const TabularMDP& env, const LayeredValueClass& cls, const AgentConfig& cfg) {
  validate_value_class(cls);
  if (cls.horizon() != env.horizon()) throw ConfigError("value class horizon does not match the environment");
  const int horizon = env.horizon();
  const Tuning tuning =
      resolve_tuning(cfg, static_cast<int>(std::min<std::int64_t>(cls.size(), std::numeric_limits<int>::max())),
                     horizon, env.num_states(), env.num_actions(), env.num_states());
  RunResult out;
  out.gamma = tuning.gamma;
  out.eta = tuning.eta;
  out.d_gec = tuning.d_gec;
  out.stages = horizon;
  out.v_star = evaluate_policy(env, plan_mdp(env).policy);
  LossLedger ledger = make_value_ledger(cls);
  SeededSampler select(cfg.seed, kSelectionStream);
  SeededSampler envs(cfg.seed, kEnvironmentStream);
  std::map<std::vector<int>, double> realized;
  // Truth tuple: factored classes use the per-step indices; support classes the matching support row.
  const bool has_truth = std::all_of(cls.truth.begin(), cls.truth.end(), [](int i) { return i >= 0; }) &&
                         static_cast<int>(cls.truth.size()) == horizon;
  int truth_support = -1;
  if (!cls.factored() && has_truth) {
    for (std::size_t n = 0; n < cls.support.size(); ++n) {
      if (cls.support[n] == cls.truth) truth_support = static_cast<int>(n);
    }
  }
  double cum = 0.0;
  for_each_round(cfg.rounds, [&](int t) {
    const PosteriorState post = model_free_posterior_update(ledger, cls, env.initial(), tuning.gamma, tuning.eta);
    out.max_normalization_error = std::max(out.max_normalization_error, normalization_error(post));
    CounterRng rng = select.next_episode();
    std::vector<int> idx;
    double mass = 0.0;
    if (cls.factored()) {
      if (cfg.uniform_selection) {
        for (int k = 0; k < horizon; ++k) idx.push_back(uniform_index(rng, static_cast<std::int64_t>(cls.layers[k].size())));
      } else {
        idx = post.sample(rng);
      }
      if (has_truth) mass = post.probability(cls.truth);
    } else {
      const int n = cfg.uniform_selection ? uniform_index(rng, static_cast<std::int64_t>(cls.support.size()))
                                          : post.sample(rng)[0];
      idx = cls.support[n];
      if (truth_support >= 0) mass = post.probabilities()[truth_support];
    }
    const ValueHypothesis f = cls.hypothesis(idx);
    const HistoryPolicy policy = f.policy();
    auto it = realized.find(idx);
    if (it == realized.end()) it = realized.emplace(idx, evaluate_policy(env, policy)).first;
    RegretRecord rec;
    rec.t = t + 1;
    rec.hypothesis_index = flatten_index(cls, idx);
    rec.v_pred = f.initial_value(env.initial());
    rec.v_realized = it->second;
    rec.regret_step = episode_regret(out.v_star, it->second);
    cum += rec.regret_step;
    rec.regret_cum = cum;
    rec.mass_on_truth = mass;
    for (int h = 1; h <= horizon; ++h) {
      const HistoryPolicy pi = compose_exploration(policy, h, cfg.explore);
      LedgerEntry entry{t, h, rec.hypothesis_index, {sample_episode(env, pi, envs)}};
      accumulate_model_free(ledger, cls, std::move(entry));
    }
    out.records.push_back(rec);
    out.sampled.push_back(idx);
  });
  if (cfg.keep_ledger) out.ledger = std::move(ledger);
  return out;
}

RunResult run_pobilinear(const TabularPOMDP& env, const HypothesisClass<PoBilinearHypothesis>& cls,
                         const AgentConfig& cfg) {
  validate_prior(cls.prior, cls.size(), cls.truth);
  const int horizon = env.horizon();
  const Tuning tuning = resolve_tuning(cfg, cls.size(), horizon, env.num_observations(), env.num_actions(),
                                       env.num_states());
  RunResult out;
  out.gamma = tuning.gamma;
  out.eta = tuning.eta;
  out.d_gec = tuning.d_gec;
  out.n_batch = tuning.n_batch;
  out.stages = horizon;
  std::vector<double> realized(cls.size());
  for (int i = 0; i < cls.size(); ++i) realized[i] = evaluate_policy(env, cls.members[i].policy);
  // The comparator is the best policy the class can express.
  out.v_star = *std::max_element(realized.begin(), realized.end());
  LossLedger ledger = make_pobilinear_ledger(cls.size());
  SeededSampler select(cfg.seed, kSelectionStream);
  SeededSampler envs(cfg.seed, kEnvironmentStream);
  double cum = 0.0;
  for_each_round(tuning.iterations, [&](int t) {
    const PosteriorState post = pobilinear_posterior_update(ledger, cls, tuning.gamma, tuning.eta);
    const Eigen::VectorXd probs = post.probabilities();
    out.max_normalization_error = std::max(out.max_normalization_error, std::abs(probs.sum() - 1.0));
    CounterRng rng = select.next_episode();
    const int i = cfg.uniform_selection ? uniform_index(rng, cls.size()) : post.sample(rng)[0];
    const auto& f = cls.members[i];
    RegretRecord rec;
    rec.t = t + 1;
    rec.hypothesis_index = i;
    rec.v_pred = f.value;
    rec.v_realized = realized[i];
    rec.regret_step = episode_regret(out.v_star, realized[i]);
    cum += rec.regret_step;
    rec.regret_cum = cum;
    rec.mass_on_truth = probs[cls.truth];
    for (int h = 1; h <= horizon; ++h) {
      const HistoryPolicy pi = compose_exploration(f.policy, h, ExplorationKind::kVType);
      LedgerEntry entry{t, h, i, {}};
      entry.samples.reserve(tuning.n_batch);
      for (int b = 0; b < tuning.n_batch; ++b) entry.samples.push_back(sample_episode(env, pi, envs));
      accumulate_pobilinear(ledger, cls, std::move(entry), tuning.n_batch);
    }
    out.records.push_back(rec);
    out.sampled.push_back({i});
  });
  if (cfg.keep_ledger) out.ledger = std::move(ledger);
  return out;
}

RunResult run_gps_idm(const Model& env, const AnyClass& cls, const AgentConfig& cfg) {
  if (cfg.rounds < 1) throw ConfigError("T must be at least 1");
  switch (cfg.kind) {
    case AgentKind::kModelBased:
      if (!std::holds_alternative<ModelClass>(cls)) throw ConfigError("model-based agent needs a model class");
      return run_model_based(env, std::get<ModelClass>(cls), cfg);
    case AgentKind::kPsr:
      if (!std::holds_alternative<ModelClass>(cls)) throw ConfigError("psr agent needs a model class");
      return run_psr(env, std::get<ModelClass>(cls), cfg);
    case AgentKind::kModelFree: {
      const auto* mdp = std::get_if<TabularMDP>(&env);
      if (!mdp) throw ConfigError("model-free agent needs an MDP environment");
      if (!std::holds_alternative<LayeredValueClass>(cls)) throw ConfigError("model-free agent needs a value class");
      return run_model_free(*mdp, std::get<LayeredValueClass>(cls), cfg);
    }
    case AgentKind::kPoBilinear: {
      const auto* pomdp = std::get_if<TabularPOMDP>(&env);
      if (!pomdp) throw ConfigError("po-bilinear agent needs a POMDP environment");
      if (!std::holds_alternative<HypothesisClass<PoBilinearHypothesis>>(cls)) {
        throw ConfigError("po-bilinear agent needs a policy/link class");
      }
      return run_pobilinear(*pomdp, std::get<HypothesisClass<PoBilinearHypothesis>>(cls), cfg);
    }
  }
  throw ConfigError("unknown agent kind");
}

}  // namespace geclab
