#include "geclab/hypotheses.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "geclab/errors.hpp"
#include "geclab/linalg.hpp"
#include "geclab/simulate.hpp"

namespace geclab {
namespace {

// Dirichlet draw concentrated at p with total concentration 1 / eps; entries
// outside the support of p stay zero.
Eigen::VectorXd perturb_row(const Eigen::VectorXd& p, double eps, CounterRng& rng) {
  if (eps <= 0.0) return p;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p[i] <= 0.0) continue;
      std::gamma_distribution<double> g(p[i] / eps, 1.0);
      out[i] = g(rng);
    }
    const double total = out.sum();
    if (total > 0.0 && std::isfinite(total)) return out / total;
  }
  return p;
}

Eigen::MatrixXd perturb_columns(const Eigen::MatrixXd& m, double eps, CounterRng& rng) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(c) = perturb_row(m.col(c), eps, rng);
  return out;
}

Model perturb_model(const Model& truth, double eps, CounterRng& rng) {
  if (const auto* mdp = std::get_if<TabularMDP>(&truth)) {
    std::vector<std::vector<Eigen::MatrixXd>> t(mdp->horizon());
    std::vector<Eigen::MatrixXd> r;
    for (int k = 0; k < mdp->horizon(); ++k) {
      for (int a = 0; a < mdp->num_actions(); ++a) t[k].push_back(perturb_columns(mdp->transition(k, a), eps, rng));
      r.push_back(mdp->rewards(k));
    }
    return TabularMDP(std::move(t), std::move(r), mdp->initial());
  }
  if (const auto* pomdp = std::get_if<TabularPOMDP>(&truth)) {
    std::vector<std::vector<Eigen::MatrixXd>> t(pomdp->horizon());
    std::vector<Eigen::MatrixXd> e, r;
    for (int k = 0; k < pomdp->horizon(); ++k) {
      for (int a = 0; a < pomdp->num_actions(); ++a) {
        t[k].push_back(perturb_columns(pomdp->transition(k, a), eps, rng));
      }
      e.push_back(perturb_columns(pomdp->emission(k), eps, rng));
      r.push_back(pomdp->rewards(k));
    }
    return TabularPOMDP(std::move(t), std::move(e), std::move(r), pomdp->initial());
  }
  throw ConfigError("perturbation classes need an MDP or POMDP truth");
}

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a - b).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

int model_horizon(const Model& m) {
  return std::visit([](const auto& x) { return x.horizon(); }, m);
}

int model_observations(const Model& m) {
  return std::visit([](const auto& x) { return x.num_observations(); }, m);
}

int model_actions(const Model& m) {
  return std::visit([](const auto& x) { return x.num_actions(); }, m);
}

double model_trajectory_probability(const Model& m, const Trajectory& tau) {
  return std::visit([&](const auto& x) { return dynamics_probability(x, tau); }, m);
}

double model_policy_value(const Model& m, const HistoryPolicy& policy) {
  return std::visit([&](const auto& x) { return evaluate_policy(x, policy); }, m);
}

ModelHypothesis make_model_hypothesis(Model model, std::int64_t node_cap) {
  if (const auto* mdp = std::get_if<TabularMDP>(&model)) {
    MdpPlan plan = plan_mdp(*mdp);
    return ModelHypothesis{std::move(model), plan.value, std::move(plan.policy)};
  }
  HistoryPlan plan = std::visit(
      [&](const auto& x) -> HistoryPlan { return plan_history_tree(x, node_cap); }, model);
  return ModelHypothesis{std::move(model), plan.value, std::move(plan.policy)};
}

void validate_prior(const Eigen::VectorXd& prior, int size, int truth) {
  if (prior.size() != size) throw ConfigError("prior length differs from the class size");
  if (size == 0) throw ConfigError("hypothesis class is empty");
  if (prior.minCoeff() < 0.0 || std::abs(prior.sum() - 1.0) > 1e-9) {
    throw ConfigError("prior is not a probability vector");
  }
  if (truth < -1 || truth >= size) throw ConfigError("truth index out of range");
}

ModelClass make_perturbation_class(const Model& truth, int n, double eps, SeededSampler& sampler) {
  if (n < 1) throw ConfigError("class size must be at least 1");
  if (eps < 0.0) throw ConfigError("perturbation scale must be nonnegative");
  ModelClass cls;
  cls.members.push_back(make_model_hypothesis(truth));
  for (int i = 1; i < n; ++i) {
    CounterRng rng = sampler.next_episode();
    cls.members.push_back(make_model_hypothesis(perturb_model(truth, eps, rng)));
  }
  cls.prior = Eigen::VectorXd::Constant(n, 1.0 / n);
  cls.truth = 0;
  return cls;
}

double ValueHypothesis::initial_value(const Eigen::VectorXd& mu) const {
  return mu.dot(q.front().rowwise().maxCoeff());
}

ValueHypothesis LayeredValueClass::hypothesis(std::span<const int> index) const {
  ValueHypothesis h;
  for (int k = 0; k < horizon(); ++k) h.q.push_back(layers[k][index[k]]);
  return h;
}

std::int64_t LayeredValueClass::size() const {
  if (!factored()) return static_cast<std::int64_t>(support.size());
  std::int64_t n = 1;
  for (const auto& l : layers) n *= static_cast<std::int64_t>(l.size());
  return n;
}

void validate_value_class(const LayeredValueClass& cls) {
  if (cls.layers.empty()) throw ConfigError("value class has no layers");
  if (cls.layer_priors.size() != cls.layers.size()) throw ConfigError("one prior per layer is required");
  for (std::size_t k = 0; k < cls.layers.size(); ++k) {
    const int truth = k < cls.truth.size() ? cls.truth[k] : -1;
    validate_prior(cls.layer_priors[k], static_cast<int>(cls.layers[k].size()), truth);
  }
  if (!cls.factored()) {
    validate_prior(cls.support_prior, static_cast<int>(cls.support.size()), -1);
    for (const auto& tuple : cls.support) {
      if (tuple.size() != cls.layers.size()) throw ConfigError("support tuple has the wrong length");
      for (std::size_t k = 0; k < tuple.size(); ++k) {
        if (tuple[k] < 0 || tuple[k] >= static_cast<int>(cls.layers[k].size())) {
          throw ConfigError("support tuple index out of range");
        }
      }
    }
  }
}

LayeredValueClass value_class_from_models(const std::vector<TabularMDP>& models,
                                          const TabularMDP& truth) {
  const int horizon = truth.horizon();
  LayeredValueClass cls;
  cls.layers.resize(horizon);
  auto add = [&](const MdpPlan& plan) {
    std::vector<int> idx(horizon);
    for (int k = 0; k < horizon; ++k) {
      auto& layer = cls.layers[k];
      int found = -1;
      for (std::size_t i = 0; i < layer.size(); ++i) {
        if (same_matrix(layer[i], plan.q[k], 1e-14)) found = static_cast<int>(i);
      }
      if (found < 0) {
        layer.push_back(plan.q[k]);
        found = static_cast<int>(layer.size()) - 1;
      }
      idx[k] = found;
    }
    return idx;
  };
  cls.truth = add(plan_mdp(truth));
  for (const auto& m : models) add(plan_mdp(m));
  for (int k = 0; k < horizon; ++k) {
    const int n = static_cast<int>(cls.layers[k].size());
    cls.layer_priors.push_back(Eigen::VectorXd::Constant(n, 1.0 / n));
  }
  return cls;
}

std::vector<Eigen::MatrixXd> memory_policy_state_values(const TabularPOMDP& pomdp,
                                                        const HistoryPolicy& policy) {
  if (policy.kind() != PolicyKind::kMemory) throw ModelError("a memory-table policy is required");
  const int horizon = pomdp.horizon();
  const int num_obs = pomdp.num_observations();
  const int num_actions = pomdp.num_actions();
  const int s = pomdp.num_states();
  const int memory = policy.memory_length();
  std::vector<Eigen::MatrixXd> v(horizon + 1);
  v[horizon] = Eigen::MatrixXd::Zero(memory_context_count(horizon, memory, num_obs, num_actions) / num_obs, s);
  for (int k = horizon - 1; k >= 0; --k) {
    const std::int64_t pairs = memory_context_count(k, memory, num_obs, num_actions) / num_obs;
    v[k] = Eigen::MatrixXd::Zero(pairs, s);
    for (std::int64_t z = 0; z < pairs; ++z) {
      for (int o = 0; o < num_obs; ++o) {
        const Eigen::RowVectorXd pi = policy.tables()[k].row(z * num_obs + o);
        for (int a = 0; a < num_actions; ++a) {
          if (pi[a] <= 0.0) continue;
          const std::int64_t next = next_pairs_code(z, k, memory, num_obs, num_actions, o, a);
          const Eigen::VectorXd future = pomdp.transition(k, a).transpose() * v[k + 1].row(next).transpose();
          for (int st = 0; st < s; ++st) {
            v[k](z, st) += pomdp.emission(k)(o, st) * pi[a] * (pomdp.reward(k, o, a) + future[st]);
          }
        }
      }
    }
  }
  return v;
}

LinkFunction solve_link_function(const TabularPOMDP& pomdp, const HistoryPolicy& policy) {
  const auto v = memory_policy_state_values(pomdp, policy);
  const int num_obs = pomdp.num_observations();
  const int s = pomdp.num_states();
  LinkFunction link;
  link.memory = policy.memory_length();
  for (int k = 0; k < pomdp.horizon(); ++k) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(pomdp.emission(k));
    const auto& sv = svd.singularValues();
    const double sigma = sv.size() >= s ? sv[s - 1] : 0.0;
    if (sigma < kRankTolerance) {
      std::ostringstream msg;
      msg << "emission at step " << k << " is not of full column rank (sigma_S = " << sigma
          << "); no pseudo-inverse link function exists";
      throw RankError(msg.str(), sigma);
    }
    const Eigen::MatrixXd pinv_t = pseudo_inverse(pomdp.emission(k).transpose());
    const Eigen::Index pairs = v[k].rows();
    Eigen::VectorXd table(pairs * num_obs);
    for (Eigen::Index z = 0; z < pairs; ++z) {
      table.segment(z * num_obs, num_obs) = pinv_t * v[k].row(z).transpose();
    }
    link.tables.push_back(std::move(table));
  }
  return link;
}

double link_value(const TabularPOMDP& pomdp, const LinkFunction& link) {
  const Eigen::VectorXd first = pomdp.emission(0) * pomdp.initial();
  return first.dot(link.tables.front());
}

double link_residual(const TabularPOMDP& pomdp, const HistoryPolicy& policy, const LinkFunction& link) {
  const auto v = memory_policy_state_values(pomdp, policy);
  const int num_obs = pomdp.num_observations();
  double worst = 0.0;
  for (int k = 0; k < pomdp.horizon(); ++k) {
    for (Eigen::Index z = 0; z < v[k].rows(); ++z) {
      const Eigen::VectorXd g = link.tables[k].segment(z * num_obs, num_obs);
      const Eigen::VectorXd implied = pomdp.emission(k).transpose() * g;
      worst = std::max(worst, (implied - v[k].row(z).transpose()).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

HypothesisClass<PoBilinearHypothesis> make_pobilinear_class(const TabularPOMDP& pomdp,
                                                           const std::vector<HistoryPolicy>& policies,
                                                           int truth_policy) {
  const int n = static_cast<int>(policies.size());
  if (n == 0) throw ConfigError("PO-bilinear class needs at least one policy");
  if (truth_policy < 0 || truth_policy >= n) throw ConfigError("truth policy index out of range");
  std::vector<LinkFunction> links;
  for (const auto& p : policies) {
    if (p.memory_length() != policies.front().memory_length()) {
      throw ConfigError("all policies must share the memory length");
    }
    links.push_back(solve_link_function(pomdp, p));
  }
  HypothesisClass<PoBilinearHypothesis> cls;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cls.members.push_back(PoBilinearHypothesis{policies[i], links[j], link_value(pomdp, links[j])});
    }
  }
  cls.prior = Eigen::VectorXd::Constant(n * n, 1.0 / (n * n));
  cls.truth = truth_policy * n + truth_policy;
  return cls;
}

RealizabilityReport audit_realizability(const ModelClass& cls, const Model& env, int samples,
                                        std::uint64_t seed, double tol) {
  RealizabilityReport report;
  if (cls.truth < 0) {
    report.location = "class has no truth member";
    return report;
  }
  const Model& truth = cls.members[cls.truth].model;
  if (model_horizon(truth) != model_horizon(env) || model_observations(truth) != model_observations(env) ||
      model_actions(truth) != model_actions(env)) {
    report.location = "truth member has different dimensions";
    report.max_deviation = std::numeric_limits<double>::infinity();
    return report;
  }
  const HistoryPolicy uniform =
      HistoryPolicy::uniform(model_horizon(env), model_observations(env), model_actions(env));
  SeededSampler sampler(seed, 0);
  for (int i = 0; i < samples; ++i) {
    CounterRng rng = sampler.next_episode();
    const Trajectory tau = std::visit([&](const auto& e) { return sample_from_model(e, uniform, rng); }, env);
    const double dev = std::abs(model_trajectory_probability(truth, tau) - model_trajectory_probability(env, tau));
    if (dev > report.max_deviation) {
      report.max_deviation = dev;
      std::ostringstream where;
      where << "trajectory " << i << " obs=[";
      for (int k = 0; k < tau.horizon(); ++k) where << (k ? "," : "") << tau.observations[k];
      where << "] acts=[";
      for (int k = 0; k < tau.horizon(); ++k) where << (k ? "," : "") << tau.actions[k];
      where << "]";
      report.location = where.str();
    }
  }
  report.realizable = report.max_deviation <= tol;
  return report;
}

RealizabilityReport audit_value_realizability(const LayeredValueClass& cls, const TabularMDP& env,
                                              double tol) {
  RealizabilityReport report;
  const MdpPlan plan = plan_mdp(env);
  for (int k = 0; k < cls.horizon(); ++k) {
    const int idx = k < static_cast<int>(cls.truth.size()) ? cls.truth[k] : -1;
    if (idx < 0) {
      report.location = "no truth entry at step " + std::to_string(k);
      report.max_deviation = std::numeric_limits<double>::infinity();
      return report;
    }
    const double dev = (cls.layers[k][idx] - plan.q[k]).cwiseAbs().maxCoeff();
    if (dev > report.max_deviation) {
      report.max_deviation = dev;
      report.location = "step " + std::to_string(k);
    }
  }
  report.realizable = report.max_deviation <= tol;
  return report;
}

bool value_class_complete(const LayeredValueClass& cls, const TabularMDP& env, double tol) {
  const int horizon = cls.horizon();
  for (int k = 0; k < horizon; ++k) {
    std::vector<Eigen::MatrixXd> targets;
    if (k + 1 == horizon) {
      targets.push_back(env.rewards(k));
    } else {
      for (const auto& next : cls.layers[k + 1]) {
        Eigen::MatrixXd t = env.rewards(k);
        const Eigen::VectorXd v = next.rowwise().maxCoeff();
        for (int a = 0; a < env.num_actions(); ++a) t.col(a) += env.transition(k, a).transpose() * v;
        targets.push_back(std::move(t));
      }
    }
    for (const auto& t : targets) {
      bool found = false;
      for (const auto& cand : cls.layers[k]) found = found || same_matrix(cand, t, tol);
      if (!found) return false;
    }
  }
  return true;
}

Model model_from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "");
  if (kind == "psr") return psr_from_json(j);
  Environment env = environment_from_json(j);
  return std::visit([](auto&& e) -> Model { return Model(std::move(e)); }, std::move(env));
}

Model load_model(const std::string& path) {
  try {
    return model_from_json(read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed model file '" + path + "': " + e.what());
  }
}

nlohmann::json model_to_json(const Model& m) {
  return std::visit(
      [](const auto& x) -> nlohmann::json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, OperatorPsr>) {
          return psr_to_json(x);
        } else {
          return environment_to_json(x);
        }
      },
      m);
}

ModelClass load_model_class(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  ModelClass cls;
  try {
    for (const auto& entry : j.at("environments")) {
      std::filesystem::path p = entry.get<std::string>();
      if (p.is_relative()) p = base / p;
      cls.members.push_back(make_model_hypothesis(load_model(p.string())));
    }
    const int n = cls.size();
    if (j.contains("prior")) {
      const auto prior = j.at("prior").get<std::vector<double>>();
      cls.prior = Eigen::Map<const Eigen::VectorXd>(prior.data(), static_cast<Eigen::Index>(prior.size()));
    } else {
      cls.prior = Eigen::VectorXd::Constant(n, 1.0 / std::max(n, 1));
    }
    cls.truth = j.value("truth", -1);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed class file '" + path + "': " + e.what());
  }
  validate_prior(cls.prior, cls.size(), cls.truth);
  return cls;
}

void save_model_class(const std::string& path, const ModelClass& cls) {
  const std::filesystem::path p(path);
  const std::string stem = p.stem().string();
  nlohmann::json j;
  j["environments"] = nlohmann::json::array();
  for (int i = 0; i < cls.size(); ++i) {
    const std::string name = stem + "_member" + std::to_string(i) + ".json";
    write_json_file((p.parent_path() / name).string(), model_to_json(cls.members[i].model));
    j["environments"].push_back(name);
  }
  j["prior"] = std::vector<double>(cls.prior.data(), cls.prior.data() + cls.prior.size());
  j["truth"] = cls.truth;
  write_json_file(path, j);
}

}  // namespace geclab
