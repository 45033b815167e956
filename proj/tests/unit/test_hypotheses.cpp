#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "geclab/agents.hpp"
#include "geclab/errors.hpp"
#include "geclab/generators.hpp"
#include "geclab/hypotheses.hpp"
#include "geclab/oracles.hpp"
#include "geclab/simulate.hpp"
#include "helpers.hpp"

using namespace geclab;

TEST_CASE("perturbation class: zero scale copies the truth") {
  CounterRng g = testutil::rng_for(40);
  const Model truth = random_mdp(3, 2, 3, g);
  SeededSampler sampler(1, 11);
  const ModelClass cls = make_perturbation_class(truth, 5, 0.0, sampler);
  CHECK(cls.truth == 0);
  for (int i = 0; i < cls.size(); ++i) {
    CHECK(cls.prior[i] == doctest::Approx(0.2));
    for (const auto& tau : oracle::all_sequences(3, 3, 2)) {
      CHECK(model_trajectory_probability(cls.members[i].model, tau) ==
            doctest::Approx(model_trajectory_probability(truth, tau)).epsilon(1e-14));
    }
  }
}

TEST_CASE("perturbation class: distinct values on nearly every seed") {
  CounterRng g = testutil::rng_for(41);
  const Model truth = random_mdp(3, 2, 3, g);
  int distinct = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SeededSampler sampler(seed, 11);
    const ModelClass cls = make_perturbation_class(truth, 20, 0.3, sampler);
    std::vector<double> values;
    for (const auto& m : cls.members) values.push_back(m.value);
    std::sort(values.begin(), values.end());
    distinct += std::adjacent_find(values.begin(), values.end()) == values.end() ? 1 : 0;
  }
  CHECK(distinct >= 99);
}

TEST_CASE("realizability audits") {
  CounterRng g = testutil::rng_for(42);
  const Model env = random_identity_pomdp(2, 2, 3, g);
  SeededSampler sampler(2, 11);
  ModelClass cls = make_perturbation_class(env, 4, 0.3, sampler);
  CHECK(audit_realizability(cls, env, 200, 0).realizable);
  cls.members[0] = cls.members[1];
  const RealizabilityReport bad = audit_realizability(cls, env, 200, 0);
  CHECK_FALSE(bad.realizable);
  CHECK(bad.max_deviation > 0.0);
  CHECK(bad.location.find("trajectory") != std::string::npos);

  const TabularMDP mdp = random_mdp(2, 2, 3, g);
  const LayeredValueClass vcls = value_class_from_models({mdp, random_mdp(2, 2, 3, g)}, mdp);
  CHECK(audit_value_realizability(vcls, mdp).realizable);
}

TEST_CASE("prior validation") {
  CHECK_THROWS_AS(validate_prior(testutil::vec({0.5, 0.4}), 2, 0), ConfigError);
  CHECK_THROWS_AS(validate_prior(testutil::vec({0.5, 0.5}), 2, 2), ConfigError);
  CHECK_NOTHROW(validate_prior(testutil::vec({0.5, 0.5}), 2, 1));
}

TEST_CASE("value hypotheses: V equals max Q and the greedy action attains it") {
  CounterRng g = testutil::rng_for(43);
  for (int i = 0; i < 20; ++i) {
    ValueHypothesis f;
    for (int k = 0; k < 3; ++k) {
      Eigen::MatrixXd q(3, 2);
      for (int j = 0; j < 6; ++j) q.data()[j] = g.uniform();
      if (i % 2 == 0) q(0, 1) = q(0, 0);  // tie at state 0
      f.q.push_back(q);
    }
    const Eigen::VectorXd mu = random_simplex(3, g);
    CHECK(f.initial_value(mu) == doctest::Approx(mu.dot(f.q[0].rowwise().maxCoeff())));
    ValueHypothesis scaled = f;
    for (auto& q : scaled.q) q *= 3.5;
    const HistoryPolicy pi = f.policy(), pi_scaled = scaled.policy();
    for (int k = 0; k < 3; ++k) {
      for (int s = 0; s < 3; ++s) {
        std::vector<int> obs(k + 1, s), acts(k, 0);
        const HistoryView view{obs, acts};
        const Eigen::VectorXd d = pi.distribution(view);
        Eigen::Index a = 0;
        d.maxCoeff(&a);
        CHECK(f.q[k](s, a) == f.q[k].row(s).maxCoeff());
        if (i % 2 == 0 && s == 0) CHECK(a == 0);
        CHECK((pi_scaled.distribution(view) - d).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
}

TEST_CASE("link functions: identity emission, residuals and zero average loss") {
  CounterRng g = testutil::rng_for(44);
  const TabularPOMDP id = random_identity_pomdp(3, 2, 3, g);
  const HistoryPolicy pi_id = random_memory_policy(1, 3, 3, 2, g);
  const LinkFunction link_id = solve_link_function(id, pi_id);
  CHECK(link_residual(id, pi_id, link_id) <= 1e-12);

  for (int i = 0; i < 5; ++i) {
    const TabularPOMDP pomdp = random_weakly_revealing_pomdp(2, 3, 2, 3, g);
    const HistoryPolicy pi = random_memory_policy(1, 3, 3, 2, g);
    PoBilinearHypothesis f{pi, solve_link_function(pomdp, pi), 0.0};
    CHECK(link_residual(pomdp, pi, f.link) <= 1e-8);
    CHECK(link_value(pomdp, f.link) == doctest::Approx(evaluate_policy(pomdp, pi)).epsilon(1e-10));
    // Exact expectation of the loss under random roll-ins with a uniform action at step h.
    for (int r = 0; r < 3; ++r) {
      const HistoryPolicy roll_in = random_memory_policy(1, 3, 3, 2, g);
      for (int h = 1; h <= 3; ++h) {
        double w = 0.0;
        for_each_trajectory(pomdp, compose_exploration(roll_in, h, ExplorationKind::kVType),
                            [&](const Trajectory& tau, double p) { w += p * pobilinear_loss(f, tau, h - 1); });
        CHECK(std::abs(w) <= 1e-8);
      }
    }
  }
}

TEST_CASE("overcomplete emissions are rejected for link functions") {
  CounterRng g = testutil::rng_for(45);
  const TabularPOMDP pomdp = random_pomdp(3, 2, 2, 2, g);
  CHECK_THROWS(solve_link_function(pomdp, random_memory_policy(1, 2, 2, 2, g)));
}

TEST_CASE("po-bilinear class pairs every policy with every link") {
  CounterRng g = testutil::rng_for(46);
  const TabularPOMDP pomdp = random_weakly_revealing_pomdp(2, 2, 2, 2, g);
  std::vector<HistoryPolicy> policies;
  for (int i = 0; i < 3; ++i) policies.push_back(random_memory_policy(1, 2, 2, 2, g));
  const auto cls = make_pobilinear_class(pomdp, policies, 1);
  CHECK(cls.size() == 9);
  CHECK(cls.truth == 4);
  CHECK(cls.prior.sum() == doctest::Approx(1.0));
}
