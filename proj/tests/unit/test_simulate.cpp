#include <doctest.h>

#include <cmath>
#include <map>

#include "geclab/generators.hpp"
#include "geclab/oracles.hpp"
#include "geclab/simulate.hpp"
#include "helpers.hpp"

using namespace geclab;

TEST_CASE("deterministic one-state MDP gives a fixed trajectory") {
  std::vector<Eigen::MatrixXd> r{Eigen::MatrixXd::Constant(1, 2, 0.25), Eigen::MatrixXd::Constant(1, 2, 0.5)};
  const TabularMDP mdp = testutil::deterministic_mdp(1, 2, 2, r);
  CounterRng rng = testutil::rng_for(10);
  for (int i = 0; i < 20; ++i) {
    const Trajectory tau = sample_episode(mdp, HistoryPolicy::uniform(2, 1, 2), rng);
    CHECK(tau.observations == std::vector<int>{0, 0, 1});
    CHECK(tau.rewards[0] + tau.rewards[1] == doctest::Approx(0.75));
  }
}

TEST_CASE("same seed and stream reproduce the trajectory") {
  CounterRng g = testutil::rng_for(11);
  const TabularPOMDP pomdp = random_pomdp(3, 2, 2, 3, g);
  SeededSampler a(5, 2), b(5, 2);
  for (int i = 0; i < 10; ++i) {
    const Trajectory x = sample_episode(pomdp, HistoryPolicy::uniform(3, 2, 2), a);
    const Trajectory y = sample_episode(pomdp, HistoryPolicy::uniform(3, 2, 2), b);
    CHECK(x.observations == y.observations);
    CHECK(x.actions == y.actions);
  }
}

TEST_CASE("trajectory probabilities sum to one and match latent-path enumeration") {
  for (int i = 0; i < 5; ++i) {
    CounterRng g = testutil::rng_for(12, i);
    const TabularPOMDP pomdp = random_pomdp(3, 2, 2, 3, g);
    const HistoryPolicy pi = random_memory_policy(1, 3, 2, 2, g);
    double total = 0.0;
    for (const auto& tau : oracle::all_sequences(3, 2, 2)) {
      const double p = trajectory_probability(pomdp, pi, tau);
      CHECK(p == doctest::Approx(oracle::latent_path_probability(pomdp, tau) * policy_probability(pi, tau))
                     .epsilon(1e-12));
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("deterministic dynamics and policy put mass one on the realized trajectory") {
  std::vector<Eigen::MatrixXd> r(2, Eigen::MatrixXd::Zero(2, 2));
  const TabularMDP mdp = testutil::deterministic_mdp(2, 2, 2, r);
  std::vector<Eigen::MatrixXd> tables(2, Eigen::MatrixXd::Zero(2, 2));
  for (auto& t : tables) t.col(1).setOnes();
  const HistoryPolicy pi = HistoryPolicy::markov(tables);
  CounterRng rng = testutil::rng_for(13);
  const Trajectory tau = sample_episode(mdp, pi, rng);
  CHECK(trajectory_probability(mdp, pi, tau) == doctest::Approx(1.0));
}

TEST_CASE("identity-emission visit frequencies match the chain within 3 sigma") {
  CounterRng g = testutil::rng_for(14);
  const TabularPOMDP pomdp = random_identity_pomdp(3, 2, 3, g);
  std::vector<Eigen::MatrixXd> tables;
  for (int k = 0; k < 3; ++k) {
    Eigen::MatrixXd t(3, 2);
    for (int s = 0; s < 3; ++s) {
      const double p = 0.2 + 0.3 * s;
      t.row(s) << p, 1.0 - p;
    }
    tables.push_back(t);
  }
  const HistoryPolicy pi = HistoryPolicy::markov(tables);
  // Exact marginals by matrix products.
  std::vector<Eigen::VectorXd> marg{pomdp.initial()};
  for (int k = 0; k + 1 < 3; ++k) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(3);
    for (int a = 0; a < 2; ++a) next += pomdp.transition(k, a) * marg[k].cwiseProduct(tables[k].col(a));
    marg.push_back(next);
  }
  constexpr int kN = 100000;
  std::vector<Eigen::VectorXd> counts(3, Eigen::VectorXd::Zero(3));
  SeededSampler sampler(1, 2);
  for (int i = 0; i < kN; ++i) {
    const Trajectory tau = sample_episode(pomdp, pi, sampler);
    for (int k = 0; k < 3; ++k) counts[k][tau.observations[k]] += 1.0;
  }
  for (int k = 0; k < 3; ++k) {
    for (int s = 0; s < 3; ++s) {
      const double p = marg[k][s];
      const double sigma = std::sqrt(p * (1.0 - p) / kN);
      CHECK(std::abs(counts[k][s] / kN - p) <= 3.0 * sigma + 1e-12);
    }
  }
}

TEST_CASE("episode frequencies pass a chi-square test against trajectory_probability") {
  // Critical value of chi-square at 0.001 computed from the Wilson-Hilferty
  // approximation for the degrees of freedom at hand.
  for (int seed = 0; seed < 3; ++seed) {
    CounterRng g = testutil::rng_for(15, seed);
    const TabularPOMDP pomdp = random_pomdp(2, 2, 2, 2, g);
    const HistoryPolicy pi = HistoryPolicy::uniform(2, 2, 2);
    std::map<std::vector<int>, double> expected;
    for (const auto& tau : oracle::all_sequences(2, 2, 2)) {
      std::vector<int> key = tau.observations;
      key.insert(key.end(), tau.actions.begin(), tau.actions.end());
      expected[key] = trajectory_probability(pomdp, pi, tau);
    }
    constexpr int kN = 100000;
    std::map<std::vector<int>, double> seen;
    SeededSampler sampler(static_cast<std::uint64_t>(seed), 2);
    for (int i = 0; i < kN; ++i) {
      Trajectory tau = sample_episode(pomdp, pi, sampler);
      tau.observations.back() = 2;
      std::vector<int> key = tau.observations;
      key.insert(key.end(), tau.actions.begin(), tau.actions.end());
      seen[key] += 1.0;
    }
    double chi2 = 0.0;
    int cells = 0;
    for (const auto& [key, p] : expected) {
      if (p <= 0.0) continue;
      const double e = p * kN;
      chi2 += (seen[key] - e) * (seen[key] - e) / e;
      ++cells;
    }
    const double dof = cells - 1;
    const double z = 3.0902;  // upper 0.001 normal quantile
    const double crit = dof * std::pow(1.0 - 2.0 / (9.0 * dof) + z * std::sqrt(2.0 / (9.0 * dof)), 3.0);
    CHECK(chi2 < crit);
  }
}

TEST_CASE("compose_exploration: q-type, v-type and psr-type") {
  CounterRng g = testutil::rng_for(16);
  const HistoryPolicy base = random_memory_policy(1, 3, 2, 3, g);
  const HistoryPolicy q = compose_exploration(base, 2, ExplorationKind::kQType);
  const HistoryPolicy v = compose_exploration(base, 2, ExplorationKind::kVType);
  const HistoryPolicy p = compose_exploration(base, 1, ExplorationKind::kPsrType, {{2}});
  for (const auto& tau : oracle::all_sequences(3, 2, 3)) {
    for (int k = 0; k < 3; ++k) {
      const HistoryView view{std::span<const int>(tau.observations.data(), k + 1),
                             std::span<const int>(tau.actions.data(), k)};
      CHECK((q.distribution(view) - base.distribution(view)).cwiseAbs().maxCoeff() == 0.0);
      const Eigen::VectorXd dv = v.distribution(view);
      if (k == 1) {
        CHECK((dv.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
      } else {
        CHECK((dv - base.distribution(view)).cwiseAbs().maxCoeff() == 0.0);
      }
      const Eigen::VectorXd dp = p.distribution(view);
      if (k == 0) {
        CHECK((dp.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
      } else if (k == 1) {
        CHECK(dp[2] == 1.0);
      } else {
        CHECK((dp - base.distribution(view)).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
  CHECK_THROWS(compose_exploration(base, 0, ExplorationKind::kVType));
  CHECK_THROWS(compose_exploration(base, 3, ExplorationKind::kPsrType, {{0}}));
}
