#include "geclab/psr.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include "geclab/errors.hpp"
#include "geclab/linalg.hpp"
#include "geclab/model_io.hpp"
#include "geclab/simulate.hpp"

namespace geclab {
namespace {

constexpr double kSigmaFloor = 1e-9;
constexpr double kCompletionAudit = 1e-8;

std::string describe(const CoreTest& t) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < t.observations.size(); ++i) {
    if (i > 0) out << ", a=" << t.actions[i - 1] << ", ";
    out << "o=" << t.observations[i];
  }
  out << ")";
  return out.str();
}

std::string describe_window(std::span<const int> obs, std::span<const int> acts) {
  CoreTest t{{obs.begin(), obs.end()}, {acts.begin(), acts.end()}};
  return describe(t);
}

// Selector for steps where the core tests run to the end of the episode.
Eigen::MatrixXd selector(const CoreTestSet& core, int step, int obs, int action) {
  const auto& from = core.tests(step);
  const auto& to = core.tests(step + 1);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<int>(to.size()), static_cast<int>(from.size()));
  for (std::size_t c = 0; c < from.size(); ++c) {
    const CoreTest& t = from[c];
    if (t.observations.front() != obs) continue;
    if (!t.actions.empty() && t.actions.front() != action) continue;
    CoreTest rest;
    rest.observations.assign(t.observations.begin() + 1, t.observations.end());
    if (!t.actions.empty()) rest.actions.assign(t.actions.begin() + 1, t.actions.end());
    const int r = core.index_of(step + 1, rest);
    if (r >= 0) m(r, static_cast<int>(c)) = 1.0;
  }
  return m;
}

bool tests_reach_end(const CoreTestSet& core, int step) {
  const int remaining = core.horizon() - step;
  for (const auto& t : core.tests(step)) {
    if (static_cast<int>(t.observations.size()) != remaining) return false;
  }
  return true;
}

std::vector<Eigen::MatrixXd> copy_rewards(const TabularPOMDP& pomdp) {
  std::vector<Eigen::MatrixXd> r;
  for (int k = 0; k < pomdp.horizon(); ++k) r.push_back(pomdp.rewards(k));
  return r;
}

using OperatorTable = std::vector<std::vector<std::vector<Eigen::MatrixXd>>>;

OperatorTable empty_operators(int horizon, int num_obs) {
  return OperatorTable(horizon, std::vector<std::vector<Eigen::MatrixXd>>(num_obs));
}

}  // namespace

// ---------------------------------------------------------------------------
// CoreTestSet

CoreTestSet::CoreTestSet(std::vector<std::vector<CoreTest>> tests) : tests_(std::move(tests)) {
  if (tests_.size() < 2) throw ModelError("core test set needs a horizon of at least 1");
  const int horizon = static_cast<int>(tests_.size()) - 1;
  const auto& last = tests_.back();
  if (last.size() != 1 || !last.front().observations.empty() || !last.front().actions.empty()) {
    throw ModelError("the final core test set must be the single dummy test");
  }
  action_sets_.resize(tests_.size());
  action_sets_.back().push_back({});
  for (int k = 0; k < horizon; ++k) {
    if (tests_[k].empty()) throw ModelError("core test set at step " + std::to_string(k) + " is empty");
    for (std::size_t i = 0; i < tests_[k].size(); ++i) {
      const CoreTest& t = tests_[k][i];
      if (t.observations.empty() || t.actions.size() + 1 != t.observations.size()) {
        throw ModelError("malformed core test " + describe(t));
      }
      if (static_cast<int>(t.observations.size()) > horizon - k) {
        throw ModelError("core test " + describe(t) + " runs past the horizon");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (tests_[k][j] == t) throw ModelError("duplicate core test " + describe(t));
      }
      auto& seqs = action_sets_[k];
      if (std::find(seqs.begin(), seqs.end(), t.actions) == seqs.end()) seqs.push_back(t.actions);
    }
  }
}

CoreTestSet CoreTestSet::m_step(int horizon, int m, int num_obs, int num_actions) {
  if (m < 1) throw ModelError("core test length must be at least 1");
  std::vector<std::vector<CoreTest>> tests(horizon + 1);
  for (int k = 0; k < horizon; ++k) {
    const int width = std::min(m - 1, horizon - 1 - k) + 1;
    std::int64_t count = num_obs;
    for (int j = 1; j < width; ++j) count *= static_cast<std::int64_t>(num_obs) * num_actions;
    for (std::int64_t idx = 0; idx < count; ++idx) {
      CoreTest t;
      t.observations.assign(width, 0);
      t.actions.assign(width - 1, 0);
      std::int64_t rest = idx;
      t.observations[width - 1] = static_cast<int>(rest % num_obs);
      rest /= num_obs;
      for (int j = width - 2; j >= 0; --j) {
        t.actions[j] = static_cast<int>(rest % num_actions);
        rest /= num_actions;
        t.observations[j] = static_cast<int>(rest % num_obs);
        rest /= num_obs;
      }
      tests[k].push_back(std::move(t));
    }
  }
  tests[horizon].push_back(CoreTest{});
  return CoreTestSet(std::move(tests));
}

int CoreTestSet::index_of(int step, const CoreTest& t) const {
  const auto& ts = tests_[step];
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] == t) return static_cast<int>(i);
  }
  return -1;
}

int CoreTestSet::max_action_sequences() const {
  std::size_t best = 0;
  for (const auto& s : action_sets_) best = std::max(best, s.size());
  return static_cast<int>(best);
}

// ---------------------------------------------------------------------------
// OperatorPsr

OperatorPsr::OperatorPsr(CoreTestSet core, int num_obs, int num_actions, Eigen::VectorXd q0,
                         OperatorTable operators, std::vector<Eigen::MatrixXd> rewards)
    : core_(std::move(core)),
      num_obs_(num_obs),
      num_actions_(num_actions),
      q0_(std::move(q0)),
      ops_(std::move(operators)),
      rewards_(std::move(rewards)) {
  const int horizon = core_.horizon();
  if (num_obs <= 0 || num_actions <= 0) throw ModelError("PSR needs observations and actions");
  if (q0_.size() != core_.size(0)) throw ModelError("q0 length differs from |U_0|");
  if (static_cast<int>(ops_.size()) != horizon) throw ModelError("PSR needs one operator set per step");
  for (int k = 0; k < horizon; ++k) {
    if (static_cast<int>(ops_[k].size()) != num_obs) throw ModelError("operator table has wrong size");
    for (int o = 0; o < num_obs; ++o) {
      if (static_cast<int>(ops_[k][o].size()) != num_actions) {
        throw ModelError("operator table has wrong size");
      }
      for (int a = 0; a < num_actions; ++a) {
        const auto& m = ops_[k][o][a];
        if (m.rows() != core_.size(k + 1) || m.cols() != core_.size(k)) {
          std::ostringstream msg;
          msg << "operator M_" << k << "(" << o << "," << a << ") has shape " << m.rows() << "x"
              << m.cols();
          throw ModelError(msg.str());
        }
      }
    }
  }
  if (static_cast<int>(rewards_.size()) != horizon) throw ModelError("PSR needs one reward table per step");
  for (const auto& r : rewards_) {
    if (r.rows() != num_obs || r.cols() != num_actions || r.minCoeff() < 0.0) {
      throw ModelError("PSR reward table is malformed");
    }
  }
  if (reward_budget(rewards_) > 1.0 + kStochasticTolerance) throw ModelError("reward budget exceeds 1");
  std::vector<int> zeros(horizon, 0);
  canonical_ = normalizers(zeros);
}

std::vector<Eigen::RowVectorXd> OperatorPsr::normalizers(std::span<const int> completion) const {
  const int horizon = core_.horizon();
  std::vector<Eigen::RowVectorXd> z(horizon + 1);
  z[horizon] = Eigen::RowVectorXd::Ones(1);
  for (int k = horizon - 1; k >= 0; --k) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(core_.size(k + 1), core_.size(k));
    for (int o = 0; o < num_obs_; ++o) sum += ops_[k][o][completion[k]];
    z[k] = z[k + 1] * sum;
  }
  return z;
}

Eigen::VectorXd OperatorPsr::observation_joint(int step, const Eigen::VectorXd& q, int action) const {
  Eigen::VectorXd out(num_obs_);
  for (int o = 0; o < num_obs_; ++o) out[o] = canonical_[step + 1].dot(ops_[step][o][action] * q);
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

Eigen::MatrixXd test_emission_matrix(const TabularPOMDP& pomdp, const CoreTestSet& core, int step) {
  const int s = pomdp.num_states();
  const auto& tests = core.tests(step);
  Eigen::MatrixXd g(static_cast<int>(tests.size()), s);
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const CoreTest& t = tests[i];
    if (t.observations.empty()) {
      g.row(static_cast<int>(i)).setOnes();
      continue;
    }
    const int w = static_cast<int>(t.observations.size());
    Eigen::VectorXd v = pomdp.emission(step + w - 1).row(t.observations[w - 1]).transpose();
    for (int j = w - 2; j >= 0; --j) {
      Eigen::VectorXd next = pomdp.transition(step + j, t.actions[j]).transpose() * v;
      v = pomdp.emission(step + j).row(t.observations[j]).transpose().cwiseProduct(next);
    }
    g.row(static_cast<int>(i)) = v.transpose();
  }
  return g;
}

OperatorPsr psr_from_weakly_revealing_pomdp(const TabularPOMDP& pomdp, int m) {
  const int horizon = pomdp.horizon();
  const int num_obs = pomdp.num_observations();
  const int num_actions = pomdp.num_actions();
  const int s = pomdp.num_states();
  CoreTestSet core = CoreTestSet::m_step(horizon, m, num_obs, num_actions);
  std::vector<Eigen::MatrixXd> g(horizon + 1);
  for (int k = 0; k <= horizon; ++k) g[k] = test_emission_matrix(pomdp, core, k);
  OperatorTable ops = empty_operators(horizon, num_obs);
  for (int k = 0; k < horizon; ++k) {
    const bool use_selector = tests_reach_end(core, k);
    Eigen::MatrixXd g_pinv;
    if (!use_selector) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(g[k]);
      const auto& sv = svd.singularValues();
      const double sigma_s = sv.size() >= s ? sv[s - 1] : 0.0;
      if (sigma_s < kSigmaFloor) {
        std::ostringstream msg;
        msg << "POMDP is not " << m << "-step weakly revealing: sigma_S of the core emission "
            << "matrix at step " << k << " is " << sigma_s;
        throw RankError(msg.str(), sigma_s);
      }
      g_pinv = pseudo_inverse(g[k]);
    }
    for (int o = 0; o < num_obs; ++o) {
      for (int a = 0; a < num_actions; ++a) {
        if (use_selector) {
          ops[k][o].push_back(selector(core, k, o, a));
        } else {
          Eigen::VectorXd emit = pomdp.emission(k).row(o).transpose();
          ops[k][o].push_back(g[k + 1] * pomdp.transition(k, a) * emit.asDiagonal() * g_pinv);
        }
      }
    }
  }
  Eigen::VectorXd q0 = g[0] * pomdp.initial();
  return OperatorPsr(std::move(core), num_obs, num_actions, std::move(q0), std::move(ops),
                     copy_rewards(pomdp));
}

namespace {

// Depth-first walk over reachable (latent path, observation, action) prefixes.
// visit(step, state, observations, actions) is called with observations
// holding o_0..o_step and actions a_0..a_{step-1}.
void walk_reachable(const TabularPOMDP& pomdp,
                    const std::function<void(int, int, std::span<const int>, std::span<const int>)>& visit) {
  const int horizon = pomdp.horizon();
  std::vector<int> obs(horizon, 0), acts(horizon, 0);
  std::function<void(int, int)> rec = [&](int k, int s) {
    for (int o = 0; o < pomdp.num_observations(); ++o) {
      if (pomdp.emission(k)(o, s) <= 0.0) continue;
      obs[k] = o;
      visit(k, s, std::span<const int>(obs.data(), k + 1), std::span<const int>(acts.data(), k));
      if (k + 1 == horizon) continue;
      for (int a = 0; a < pomdp.num_actions(); ++a) {
        acts[k] = a;
        for (int s2 = 0; s2 < pomdp.num_states(); ++s2) {
          if (pomdp.transition(k, a)(s2, s) > 0.0) rec(k + 1, s2);
        }
      }
    }
  };
  for (int s = 0; s < pomdp.num_states(); ++s) {
    if (pomdp.initial()[s] > 0.0) rec(0, s);
  }
}

std::int64_t window_code(std::span<const int> obs, std::span<const int> acts, int m, int num_obs,
                         int num_actions) {
  HistoryView view{obs, acts};
  return memory_context_code(view, m - 1, num_obs, num_actions);
}

}  // namespace

Decoder infer_decoder(const TabularPOMDP& pomdp, int m) {
  if (m < 1) throw ModelError("decoding window must be at least 1");
  const int horizon = pomdp.horizon();
  Decoder d;
  d.m = m;
  for (int k = 0; k < horizon; ++k) {
    d.table.emplace_back(memory_context_count(k, m - 1, pomdp.num_observations(), pomdp.num_actions()), -1);
  }
  walk_reachable(pomdp, [&](int k, int s, std::span<const int> obs, std::span<const int> acts) {
    const std::int64_t code = window_code(obs, acts, m, pomdp.num_observations(), pomdp.num_actions());
    int& slot = d.table[k][code];
    if (slot >= 0 && slot != s) {
      const int first = std::max(0, k - m + 1);
      std::ostringstream msg;
      msg << "POMDP is not " << m << "-step decodable: window "
          << describe_window(obs.subspan(first), acts.subspan(first)) << " at step " << k
          << " is reachable from states " << slot << " and " << s;
      throw DecoderError(msg.str());
    }
    slot = s;
  });
  return d;
}

void verify_decoder(const TabularPOMDP& pomdp, const Decoder& decoder) {
  const int m = decoder.m;
  if (static_cast<int>(decoder.table.size()) != pomdp.horizon()) {
    throw DecoderError("decoder horizon differs from the POMDP");
  }
  for (int k = 0; k < pomdp.horizon(); ++k) {
    const auto expected = memory_context_count(k, m - 1, pomdp.num_observations(), pomdp.num_actions());
    if (static_cast<std::int64_t>(decoder.table[k].size()) != expected) {
      throw DecoderError("decoder table at step " + std::to_string(k) + " has the wrong size");
    }
  }
  walk_reachable(pomdp, [&](int k, int s, std::span<const int> obs, std::span<const int> acts) {
    const std::int64_t code = window_code(obs, acts, m, pomdp.num_observations(), pomdp.num_actions());
    const int got = decoder.decode(k, code);
    if (got != s) {
      const int first = std::max(0, k - m + 1);
      std::ostringstream msg;
      msg << "decoder maps window " << describe_window(obs.subspan(first), acts.subspan(first))
          << " at step " << k << " to " << got << " but latent state " << s << " is reachable";
      throw DecoderError(msg.str());
    }
  });
}

OperatorPsr psr_from_decodable_pomdp(const TabularPOMDP& pomdp, const Decoder& decoder) {
  verify_decoder(pomdp, decoder);
  const int m = decoder.m;
  const int horizon = pomdp.horizon();
  const int num_obs = pomdp.num_observations();
  const int num_actions = pomdp.num_actions();
  const int s = pomdp.num_states();
  CoreTestSet core = CoreTestSet::m_step(horizon, m, num_obs, num_actions);
  OperatorTable ops = empty_operators(horizon, num_obs);
  for (int k = 0; k < horizon; ++k) {
    const bool use_selector = tests_reach_end(core, k);
    for (int o = 0; o < num_obs; ++o) {
      for (int a = 0; a < num_actions; ++a) {
        if (use_selector) {
          ops[k][o].push_back(selector(core, k, o, a));
          continue;
        }
        Eigen::MatrixXd op = Eigen::MatrixXd::Zero(core.size(k + 1), core.size(k));
        const auto& next_tests = core.tests(k + 1);
        for (std::size_t r = 0; r < next_tests.size(); ++r) {
          const CoreTest& next = next_tests[r];
          // Full window o_k, a_k, ..., o_{k+m}; t_k is its first m observations.
          std::vector<int> obs_full{o};
          obs_full.insert(obs_full.end(), next.observations.begin(), next.observations.end());
          std::vector<int> acts_full{a};
          acts_full.insert(acts_full.end(), next.actions.begin(), next.actions.end());
          CoreTest t{{obs_full.begin(), obs_full.begin() + m}, {acts_full.begin(), acts_full.begin() + (m - 1)}};
          const int c = core.index_of(k, t);
          if (c < 0) continue;
          const int decode_step = k + m - 1;
          const std::int64_t code =
              window_code(t.observations, t.actions, m, num_obs, num_actions);
          const int latent = decoder.decode(decode_step, code);
          if (latent < 0) continue;
          const int act = acts_full[m - 1];
          const int last_obs = obs_full[m];
          double p = 0.0;
          for (int s2 = 0; s2 < s; ++s2) {
            p += pomdp.emission(k + m)(last_obs, s2) * pomdp.transition(decode_step, act)(s2, latent);
          }
          op(static_cast<int>(r), c) = p;
        }
        ops[k][o].push_back(std::move(op));
      }
    }
  }
  Eigen::VectorXd q0 = test_emission_matrix(pomdp, core, 0) * pomdp.initial();
  return OperatorPsr(std::move(core), num_obs, num_actions, std::move(q0), std::move(ops),
                     copy_rewards(pomdp));
}

OperatorPsr psr_with_minimal_core(const TabularPOMDP& pomdp) {
  const int horizon = pomdp.horizon();
  const int num_obs = pomdp.num_observations();
  const int num_actions = pomdp.num_actions();
  const int s = pomdp.num_states();
  if (horizon > 1 && num_obs != s) throw RankError("minimal core needs as many observations as states", 0.0);
  std::vector<Eigen::MatrixXd> g_inv(horizon);
  for (int k = 1; k < horizon; ++k) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(pomdp.emission(k));
    const double sigma = svd.singularValues()[s - 1];
    if (sigma < kSigmaFloor) {
      std::ostringstream msg;
      msg << "emission at step " << k << " is not invertible: sigma_S = " << sigma;
      throw RankError(msg.str(), sigma);
    }
    g_inv[k] = pomdp.emission(k).inverse();
  }
  const Eigen::VectorXd first_obs = pomdp.emission(0) * pomdp.initial();
  Eigen::Index best = 0;
  first_obs.maxCoeff(&best);
  std::vector<std::vector<CoreTest>> tests(horizon + 1);
  tests[0].push_back(CoreTest{{static_cast<int>(best)}, {}});
  for (int k = 1; k < horizon; ++k) {
    for (int o = 0; o < num_obs; ++o) tests[k].push_back(CoreTest{{o}, {}});
  }
  tests[horizon].push_back(CoreTest{});
  CoreTestSet core(std::move(tests));
  auto next_matrix = [&](int k) -> Eigen::MatrixXd {
    if (k + 1 < horizon) return pomdp.emission(k + 1);
    return Eigen::MatrixXd::Ones(1, s);
  };
  OperatorTable ops = empty_operators(horizon, num_obs);
  for (int k = 0; k < horizon; ++k) {
    const Eigen::MatrixXd g_next = next_matrix(k);
    for (int o = 0; o < num_obs; ++o) {
      Eigen::VectorXd emit = pomdp.emission(k).row(o).transpose();
      for (int a = 0; a < num_actions; ++a) {
        Eigen::MatrixXd base = g_next * pomdp.transition(k, a) * emit.asDiagonal();
        if (k == 0) {
          ops[k][o].push_back(base * pomdp.initial() / first_obs[best]);
        } else {
          ops[k][o].push_back(base * g_inv[k]);
        }
      }
    }
  }
  Eigen::VectorXd q0 = Eigen::VectorXd::Constant(1, first_obs[best]);
  return OperatorPsr(std::move(core), num_obs, num_actions, std::move(q0), std::move(ops),
                     copy_rewards(pomdp));
}

TabularPOMDP latent_mdp_to_pomdp(const std::vector<TabularMDP>& components,
                                 const Eigen::VectorXd& weights) {
  if (components.empty()) throw ModelError("latent MDP needs at least one component");
  if (static_cast<std::size_t>(weights.size()) != components.size()) {
    throw ModelError("one mixture weight per component is required");
  }
  const TabularMDP& first = components.front();
  const int horizon = first.horizon();
  const int s = first.num_states();
  const int num_actions = first.num_actions();
  const int mix = static_cast<int>(components.size());
  for (const auto& c : components) {
    if (c.horizon() != horizon || c.num_states() != s || c.num_actions() != num_actions) {
      throw ModelError("latent MDP components disagree on horizon, states or actions");
    }
    for (int k = 0; k < horizon; ++k) {
      if ((c.rewards(k) - first.rewards(k)).cwiseAbs().maxCoeff() > kStochasticTolerance) {
        throw ModelError("latent MDP components must share the reward function");
      }
    }
  }
  const int big = s * mix;
  Eigen::VectorXd mu(big);
  for (int j = 0; j < mix; ++j) mu.segment(j * s, s) = weights[j] * components[j].initial();
  std::vector<std::vector<Eigen::MatrixXd>> transitions(horizon);
  std::vector<Eigen::MatrixXd> emissions, rewards;
  for (int k = 0; k < horizon; ++k) {
    for (int a = 0; a < num_actions; ++a) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(big, big);
      for (int j = 0; j < mix; ++j) t.block(j * s, j * s, s, s) = components[j].transition(k, a);
      transitions[k].push_back(std::move(t));
    }
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(s, big);
    for (int j = 0; j < mix; ++j) e.block(0, j * s, s, s) = Eigen::MatrixXd::Identity(s, s);
    emissions.push_back(std::move(e));
    rewards.push_back(first.rewards(k));
  }
  return TabularPOMDP(std::move(transitions), std::move(emissions), std::move(rewards), std::move(mu));
}

double psr_trajectory_probability(const OperatorPsr& psr, const Trajectory& tau,
                                  const HistoryPolicy& policy) {
  return trajectory_probability(psr, policy, tau);
}

Eigen::VectorXd conditional_next_obs(const OperatorPsr& psr, std::span<const int> observations,
                                     std::span<const int> actions, int action) {
  const int k = static_cast<int>(observations.size());
  if (static_cast<int>(actions.size()) != k || k >= psr.horizon()) {
    throw ModelError("history does not end before a valid step");
  }
  Eigen::VectorXd q = psr.q0();
  for (int j = 0; j < k; ++j) q = psr.advance(j, q, observations[j], actions[j]);
  auto conditional = [&](const Eigen::RowVectorXd& z) {
    Eigen::VectorXd joint(psr.num_observations());
    for (int o = 0; o < psr.num_observations(); ++o) {
      joint[o] = std::max(0.0, z.dot(psr.op(k, o, action) * q));
    }
    return joint;
  };
  Eigen::VectorXd joint = conditional(psr.canonical_normalizers()[k + 1]);
  const double total = joint.sum();
  if (!(total > 1e-300)) throw UnreachableHistory("conditional requested on a zero-probability history");
  joint /= total;
  std::vector<int> last(psr.horizon(), psr.num_actions() - 1);
  Eigen::VectorXd alt = conditional(psr.normalizers(last)[k + 1]);
  const double alt_total = alt.sum();
  if (alt_total > 1e-300) {
    alt /= alt_total;
    if ((alt - joint).cwiseAbs().maxCoeff() > kCompletionAudit) {
      throw ModelError("conditional depends on the action completion; the PSR is not causal");
    }
  }
  return joint;
}

// ---------------------------------------------------------------------------
// File format

nlohmann::json psr_to_json(const OperatorPsr& psr) {
  using nlohmann::json;
  json j;
  j["kind"] = "psr";
  j["horizon"] = psr.horizon();
  j["observations"] = psr.num_observations();
  j["actions"] = psr.num_actions();
  json core = json::array();
  for (int k = 0; k <= psr.horizon(); ++k) {
    json step = json::array();
    for (const auto& t : psr.core().tests(k)) step.push_back({{"o", t.observations}, {"a", t.actions}});
    core.push_back(std::move(step));
  }
  j["core_tests"] = std::move(core);
  j["q0"] = std::vector<double>(psr.q0().data(), psr.q0().data() + psr.q0().size());
  auto rows = [](const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      out.push_back(std::move(row));
    }
    return out;
  };
  json ops = json::array();
  for (int k = 0; k < psr.horizon(); ++k) {
    json by_obs = json::array();
    for (int o = 0; o < psr.num_observations(); ++o) {
      json by_act = json::array();
      for (int a = 0; a < psr.num_actions(); ++a) by_act.push_back(rows(psr.op(k, o, a)));
      by_obs.push_back(std::move(by_act));
    }
    ops.push_back(std::move(by_obs));
  }
  j["operators"] = std::move(ops);
  json rewards = json::array();
  for (int k = 0; k < psr.horizon(); ++k) rewards.push_back(rows(psr.rewards(k)));
  j["rewards"] = std::move(rewards);
  return j;
}

OperatorPsr psr_from_json(const nlohmann::json& j) {
  try {
    const int horizon = j.at("horizon").get<int>();
    const int num_obs = j.at("observations").get<int>();
    const int num_actions = j.at("actions").get<int>();
    if (horizon <= 0 || num_obs <= 0 || num_actions <= 0) throw ConfigError("PSR sizes must be positive");
    std::vector<std::vector<CoreTest>> tests;
    for (const auto& step : j.at("core_tests")) {
      std::vector<CoreTest> ts;
      for (const auto& t : step) {
        ts.push_back(CoreTest{t.at("o").get<std::vector<int>>(), t.at("a").get<std::vector<int>>()});
      }
      tests.push_back(std::move(ts));
    }
    if (static_cast<int>(tests.size()) != horizon + 1) throw ConfigError("core_tests needs H + 1 steps");
    CoreTestSet core(std::move(tests));
    const auto q0v = j.at("q0").get<std::vector<double>>();
    Eigen::VectorXd q0 = Eigen::Map<const Eigen::VectorXd>(q0v.data(), static_cast<Eigen::Index>(q0v.size()));
    auto matrix = [](const nlohmann::json& rows) {
      const auto data = rows.get<std::vector<std::vector<double>>>();
      const Eigen::Index r = static_cast<Eigen::Index>(data.size());
      const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(data[0].size()) : 0;
      Eigen::MatrixXd m(r, c);
      for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(data[i].size()) != c) throw ConfigError("ragged matrix in PSR file");
        for (Eigen::Index jx = 0; jx < c; ++jx) m(i, jx) = data[i][jx];
      }
      return m;
    };
    OperatorTable ops = empty_operators(horizon, num_obs);
    const auto& jops = j.at("operators");
    if (static_cast<int>(jops.size()) != horizon) throw ConfigError("operators needs H steps");
    for (int k = 0; k < horizon; ++k) {
      if (static_cast<int>(jops[k].size()) != num_obs) throw ConfigError("operators[k] needs O entries");
      for (int o = 0; o < num_obs; ++o) {
        if (static_cast<int>(jops[k][o].size()) != num_actions) throw ConfigError("operators[k][o] needs A entries");
        for (int a = 0; a < num_actions; ++a) ops[k][o].push_back(matrix(jops[k][o][a]));
      }
    }
    std::vector<Eigen::MatrixXd> rewards;
    if (j.contains("rewards")) {
      for (const auto& r : j.at("rewards")) rewards.push_back(matrix(r));
    } else {
      rewards.assign(horizon, Eigen::MatrixXd::Zero(num_obs, num_actions));
    }
    return OperatorPsr(std::move(core), num_obs, num_actions, std::move(q0), std::move(ops),
                       std::move(rewards));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed PSR file: ") + e.what());
  }
}

OperatorPsr load_psr(const std::string& path) { return psr_from_json(read_json_file(path)); }

void save_psr(const std::string& path, const OperatorPsr& psr) { write_json_file(path, psr_to_json(psr)); }

}  // namespace geclab
