#include <doctest.h>

#include <cmath>

#include "geclab/agents.hpp"
#include "geclab/complexity.hpp"
#include "geclab/generators.hpp"
#include "geclab/oracles.hpp"
#include "geclab/planning.hpp"
#include "geclab/simulate.hpp"
#include "helpers.hpp"

using namespace geclab;
using testutil::vec;

namespace {

// Two-state, one-action MDP whose step-0 transition from state 0 reaches
// state 1 with probability p.
TabularMDP two_state_mdp(double p) {
  Eigen::MatrixXd t(2, 2);
  t << 1.0 - p, 0.5, p, 0.5;
  std::vector<std::vector<Eigen::MatrixXd>> ts{{t}, {t}};
  return TabularMDP(ts, {Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(2, 1)}, vec({1.0, 0.0}));
}

ModelClass class_of(std::vector<Model> models, Eigen::VectorXd prior) {
  ModelClass cls;
  for (auto& m : models) cls.members.push_back(make_model_hypothesis(std::move(m)));
  cls.prior = std::move(prior);
  cls.truth = 0;
  return cls;
}

Trajectory trajectory(std::vector<int> obs, std::vector<int> acts, std::vector<double> rewards) {
  return Trajectory{std::move(obs), std::move(acts), std::move(rewards)};
}

}  // namespace

TEST_CASE("model-based log-likelihood of a single transition") {
  const ModelClass cls = class_of({two_state_mdp(0.25), two_state_mdp(0.5)}, vec({0.5, 0.5}));
  LossLedger ledger = make_model_ledger(2);
  accumulate_model_based(ledger, cls, LedgerEntry{0, 1, 0, {trajectory({0, 1, 2}, {0, 0}, {0, 0})}});
  CHECK(ledger.log_likelihood[0] == doctest::Approx(std::log(0.25)).epsilon(1e-15));
  const PosteriorState post = model_based_posterior_update(ledger, cls, 0.0, 0.5);
  CHECK(post.log_weights[0] - post.log_weights[1] == doctest::Approx(0.5 * std::log(0.25) - 0.5 * std::log(0.5)));
  CHECK(0.5 * std::log(0.25) == doctest::Approx(-0.69315).epsilon(1e-5));
}

TEST_CASE("optimism alone: values (1, 0) with gamma ln 2") {
  ModelClass cls = class_of({two_state_mdp(0.25), two_state_mdp(0.5)}, vec({0.5, 0.5}));
  cls.members[0].value = 1.0;
  cls.members[1].value = 0.0;
  const Eigen::VectorXd p = model_based_posterior_update(make_model_ledger(2), cls, std::log(2.0), 0.5).probabilities();
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("psr posterior on one trajectory with probabilities 0.5 and 0.25") {
  std::vector<std::vector<Eigen::MatrixXd>> t{{Eigen::MatrixXd::Identity(2, 2)}};
  std::vector<Eigen::MatrixXd> r{Eigen::MatrixXd::Zero(2, 1)};
  const ModelClass cls = class_of({TabularMDP(t, r, vec({0.5, 0.5})), TabularMDP(t, r, vec({0.25, 0.75}))},
                                  vec({0.5, 0.5}));
  LossLedger ledger = make_model_ledger(2);
  accumulate_psr(ledger, cls, LedgerEntry{0, 0, 0, {trajectory({0, 2}, {0}, {0})}});
  const Eigen::VectorXd p = psr_posterior_update(ledger, cls, 0.0, 0.5).probabilities();
  const double a = std::sqrt(0.5), b = std::sqrt(0.25);
  CHECK(p[0] == doctest::Approx(a / (a + b)).epsilon(1e-14));
  CHECK(p[0] == doctest::Approx(0.58579).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(0.41421).epsilon(1e-5));
}

TEST_CASE("identical likelihoods with gamma zero leave the prior") {
  const ModelClass cls = class_of({two_state_mdp(0.3), two_state_mdp(0.3), two_state_mdp(0.3)}, vec({0.2, 0.5, 0.3}));
  LossLedger mb = make_model_ledger(3), ps = make_model_ledger(3);
  CounterRng g = testutil::rng_for(50);
  for (int e = 0; e < 10; ++e) {
    const Trajectory tau = sample_episode(std::get<TabularMDP>(cls.members[0].model), cls.members[0].policy, g);
    accumulate_model_based(mb, cls, LedgerEntry{e, 1, 0, {tau}});
    accumulate_psr(ps, cls, LedgerEntry{e, 0, 0, {tau}});
  }
  CHECK((model_based_posterior_update(mb, cls, 0.0, 0.5).probabilities() - cls.prior).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((psr_posterior_update(ps, cls, 0.0, 0.5).probabilities() - cls.prior).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("elimination is permanent") {
  const ModelClass cls = class_of({two_state_mdp(0.5), two_state_mdp(0.0)}, vec({0.5, 0.5}));
  LossLedger ledger = make_model_ledger(2);
  accumulate_model_based(ledger, cls, LedgerEntry{0, 1, 0, {trajectory({0, 1, 2}, {0, 0}, {0, 0})}});
  CHECK(ledger.eliminated == std::vector<int>{1});
  for (int e = 1; e < 20; ++e) {
    accumulate_model_based(ledger, cls, LedgerEntry{e, 1, 0, {trajectory({0, 0, 2}, {0, 0}, {0, 0})}});
    const Eigen::VectorXd p = model_based_posterior_update(ledger, cls, 1.0, 0.5).probabilities();
    CHECK(p[1] == 0.0);
  }
}

TEST_CASE("log-space weights survive huge losses") {
  PosteriorState post;
  post.log_weights = vec({-1e6, -1e6 - std::log(3.0)});
  const Eigen::VectorXd p = post.probabilities();
  // The stored gap is ln 3 up to the spacing of doubles near 1e6.
  const double gap = post.log_weights[0] - post.log_weights[1];
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-gap))).epsilon(1e-14));
  CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
}

TEST_CASE("bellman error examples") {
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(1, 1, 0.5), next = Eigen::MatrixXd::Constant(1, 1, 0.1);
  CHECK(bellman_error(q, &next, Transition{0, 0, 0, 0.2, 0}) == doctest::Approx(0.2));

  std::vector<Eigen::MatrixXd> r(3, Eigen::MatrixXd::Zero(2, 2));
  r[0](0, 1) = 0.3;
  r[2](1, 0) = 0.5;
  const TabularMDP det = testutil::deterministic_mdp(2, 2, 3, r);
  const ValueHypothesis qstar{plan_mdp(det).q};
  CounterRng g = testutil::rng_for(51);
  for (int i = 0; i < 50; ++i) {
    const Trajectory tau = sample_episode(det, HistoryPolicy::uniform(3, 2, 2), g);
    for (int k = 0; k < 3; ++k) CHECK(bellman_error(qstar, transition_at(tau, k)) == doctest::Approx(0.0));
  }
}

TEST_CASE("bellman error of Q* averages to zero on a stochastic MDP") {
  CounterRng g = testutil::rng_for(52);
  const TabularMDP mdp = random_mdp(3, 2, 2, g);
  const ValueHypothesis qstar{plan_mdp(mdp).q};
  constexpr int kN = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < kN; ++i) {
    // Draw x' from P_0(. | x = 1, a = 0).
    const Eigen::VectorXd col = mdp.transition(0, 0).col(1);
    const int next = sample_index(std::span<const double>(col.data(), col.size()), g);
    const double e = bellman_error(qstar, Transition{0, 1, 0, mdp.reward(0, 1, 0), next});
    sum += e;
    sq += e * e;
  }
  const double mean = sum / kN, sd = std::sqrt(sq / kN - mean * mean);
  CHECK(std::abs(mean) <= 3.0 * sd / std::sqrt(static_cast<double>(kN)));
}

TEST_CASE("po-bilinear loss examples") {
  CHECK(pobilinear_loss(2, 0.5, 0.2, 0.1, 0.4) == doctest::Approx(-0.1));
  CHECK(pobilinear_loss(3, 0.2, 0.0, 0.0, 0.0) == 0.0);
}

TEST_CASE("model-free posterior: no data, single members and joint enumeration") {
  CounterRng g = testutil::rng_for(53);
  const TabularMDP env = random_mdp(2, 2, 2, g);
  LayeredValueClass cls;
  for (int k = 0; k < 2; ++k) {
    cls.layers.push_back({Eigen::MatrixXd::Constant(2, 2, 0.1), Eigen::MatrixXd::Constant(2, 2, 0.3),
                          Eigen::MatrixXd::Constant(2, 2, 0.2)});
    cls.layer_priors.push_back(Eigen::VectorXd::Constant(3, 1.0 / 3.0));
    cls.truth.push_back(-1);
  }
  const PosteriorState empty = model_free_posterior_update(make_value_ledger(cls), cls, env.initial(), 0.0, 0.5);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(empty.probability(std::vector<int>{i, j}) == doctest::Approx(1.0 / 9.0));
  }

  LossLedger ledger = make_value_ledger(cls);
  for (int e = 0; e < 4; ++e) {
    for (int stage = 1; stage <= 2; ++stage) {
      accumulate_model_free(ledger, cls, LedgerEntry{e, stage, 0, {sample_episode(env, HistoryPolicy::uniform(2, 2, 2), g)}});
    }
  }
  const PosteriorState post = model_free_posterior_update(ledger, cls, env.initial(), 1.3, 0.7);
  const Eigen::VectorXd joint = oracle::joint_value_posterior(cls, ledger.entries, env.initial(), 1.3, 0.7);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(std::abs(post.probability(std::vector<int>{i, j}) - joint[i * 3 + j]) <= 1e-12);
  }
  // Chain sampling frequencies agree with the tuple probabilities.
  std::vector<double> counts(9, 0.0);
  constexpr int kN = 40000;
  for (int s = 0; s < kN; ++s) {
    const auto f = post.sample(g);
    counts[f[0] * 3 + f[1]] += 1.0;
  }
  for (int c = 0; c < 9; ++c) {
    const double sigma = std::sqrt(joint[c] * (1.0 - joint[c]) / kN);
    CHECK(std::abs(counts[c] / kN - joint[c]) <= 4.0 * sigma + 1e-12);
  }

  LayeredValueClass single;
  single.layers = {{Eigen::MatrixXd::Constant(2, 2, 0.4)}, {Eigen::MatrixXd::Constant(2, 2, 0.2)}};
  single.layer_priors = {vec({1.0}), vec({1.0})};
  single.truth = {-1, -1};
  LossLedger l1 = make_value_ledger(single);
  accumulate_model_free(l1, single, LedgerEntry{0, 1, 0, {sample_episode(env, HistoryPolicy::uniform(2, 2, 2), g)}});
  CHECK(model_free_posterior_update(l1, single, env.initial(), 2.0, 5.0).probability(std::vector<int>{0, 0}) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("default tuning") {
  AgentConfig cfg;
  cfg.kind = AgentKind::kModelBased;
  cfg.rounds = 400;
  const Tuning t = resolve_tuning(cfg, 20, 3, 3, 2, 3);
  CHECK(t.eta == 0.5);
  const double d = witness_gec_bound(6.0, 3, 400, 1.0 / (3.0 * 20.0), 1.0);
  CHECK(t.d_gec == doctest::Approx(d));
  CHECK(t.gamma == doctest::Approx(2.0 * std::sqrt(std::log(20.0) * 400.0 / d)));
  cfg.kind = AgentKind::kModelFree;
  const Tuning mf = resolve_tuning(cfg, 20, 3, 3, 2, 3);
  CHECK(mf.eta == doctest::Approx(3.0 / 40.0));
  cfg.gamma = 1.5;
  CHECK(resolve_tuning(cfg, 20, 3, 3, 2, 3).gamma == 1.5);
}

namespace {

struct Setup {
  TabularMDP mdp;
  TabularPOMDP pomdp;
};

Setup small_setup() {
  CounterRng g = testutil::rng_for(54);
  TabularMDP mdp = random_mdp(2, 2, 2, g);
  TabularPOMDP pomdp = random_weakly_revealing_pomdp(2, 2, 2, 2, g);
  return {std::move(mdp), std::move(pomdp)};
}

void check_records(const RunResult& run, bool zero_regret) {
  double prev = 0.0;
  for (const auto& r : run.records) {
    CHECK(r.regret_step >= -1e-12);
    CHECK(r.regret_step <= 1.0 + 1e-12);
    CHECK(r.regret_cum >= prev - 1e-12);
    if (zero_regret) CHECK(std::abs(r.regret_step) <= 1e-12);
    prev = r.regret_cum;
  }
  CHECK(run.max_normalization_error <= 1e-12);
}

}  // namespace

TEST_CASE("a class holding only the truth incurs no regret (all agents)") {
  const Setup s = small_setup();
  AgentConfig cfg;
  cfg.rounds = 30;
  SeededSampler sampler(0, 11);

  cfg.kind = AgentKind::kModelBased;
  check_records(run_model_based(s.mdp, make_perturbation_class(s.mdp, 1, 0.3, sampler), cfg), true);
  cfg.kind = AgentKind::kPsr;
  check_records(run_psr(s.pomdp, make_perturbation_class(s.pomdp, 1, 0.3, sampler), cfg), true);
  cfg.kind = AgentKind::kModelFree;
  const LayeredValueClass vcls = value_class_from_models({s.mdp}, s.mdp);
  check_records(run_model_free(s.mdp, vcls, cfg), true);
  cfg.kind = AgentKind::kPoBilinear;
  cfg.rounds = 200;
  const HistoryPlan plan = plan_history_tree(s.pomdp);
  const auto pcls = make_pobilinear_class(s.pomdp, {HistoryPolicy::memory(1, 2, 2, plan.policy.tables())}, 0);
  check_records(run_pobilinear(s.pomdp, pcls, cfg), true);
}

TEST_CASE("gamma = eta = 0 keeps the posterior at the prior every round (all agents)") {
  const Setup s = small_setup();
  AgentConfig cfg;
  cfg.rounds = 25;
  cfg.gamma = 0.0;
  cfg.eta = 0.0;
  SeededSampler sampler(3, 11);

  cfg.kind = AgentKind::kModelBased;
  const ModelClass mcls = make_perturbation_class(s.mdp, 4, 0.3, sampler);
  for (const auto& r : run_model_based(s.mdp, mcls, cfg).records) CHECK(r.mass_on_truth == doctest::Approx(0.25));
  cfg.kind = AgentKind::kPsr;
  const ModelClass pcls = make_perturbation_class(s.pomdp, 4, 0.3, sampler);
  for (const auto& r : run_psr(s.pomdp, pcls, cfg).records) CHECK(r.mass_on_truth == doctest::Approx(0.25));
  cfg.kind = AgentKind::kModelFree;
  std::vector<TabularMDP> mdps;
  for (const auto& m : mcls.members) mdps.push_back(std::get<TabularMDP>(m.model));
  const LayeredValueClass vcls = value_class_from_models(mdps, s.mdp);
  double prior_truth = 1.0;
  for (int k = 0; k < vcls.horizon(); ++k) prior_truth *= vcls.layer_priors[k][vcls.truth[k]];
  for (const auto& r : run_model_free(s.mdp, vcls, cfg).records) {
    CHECK(r.mass_on_truth == doctest::Approx(prior_truth).epsilon(1e-12));
  }
  cfg.kind = AgentKind::kPoBilinear;
  cfg.n_batch = 5;
  CounterRng g = testutil::rng_for(55);
  std::vector<HistoryPolicy> policies;
  for (int i = 0; i < 2; ++i) policies.push_back(random_memory_policy(1, 2, 2, 2, g));
  const auto bcls = make_pobilinear_class(s.pomdp, policies, 0);
  for (const auto& r : run_pobilinear(s.pomdp, bcls, cfg).records) CHECK(r.mass_on_truth == doctest::Approx(0.25));
}

TEST_CASE("model-based agent: regret bounds, normalization and growing mass on the truth") {
  CounterRng g = testutil::rng_for(56);
  const TabularMDP mdp = random_mdp(3, 2, 3, g);
  SeededSampler sampler(4, 11);
  const ModelClass cls = make_perturbation_class(mdp, 20, 0.3, sampler);
  double early = 0.0, late = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    AgentConfig cfg;
    cfg.kind = AgentKind::kModelBased;
    cfg.rounds = 2000;
    cfg.seed = seed;
    const RunResult run = run_model_based(mdp, cls, cfg);
    check_records(run, false);
    early += run.records[99].mass_on_truth;
    late += run.records.back().mass_on_truth;
  }
  CHECK(late > early);
}

TEST_CASE("runs are deterministic in the seed") {
  const Setup s = small_setup();
  SeededSampler sampler(5, 11);
  const ModelClass cls = make_perturbation_class(s.mdp, 5, 0.3, sampler);
  AgentConfig cfg;
  cfg.kind = AgentKind::kModelBased;
  cfg.rounds = 50;
  cfg.seed = 9;
  const RunResult a = run_model_based(s.mdp, cls, cfg), b = run_model_based(s.mdp, cls, cfg);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].hypothesis_index == b.records[i].hypothesis_index);
    CHECK(a.records[i].regret_cum == b.records[i].regret_cum);
  }
}

TEST_CASE("agent kind names") {
  for (const char* name : {"model-free", "model-based", "psr", "po-bilinear"}) {
    CHECK(to_string(parse_agent_kind(name)) == name);
  }
  CHECK_THROWS(parse_agent_kind("bandit"));
}
