#include <doctest.h>

#include <cmath>

#include "geclab/errors.hpp"
#include "geclab/generators.hpp"
#include "geclab/oracles.hpp"
#include "geclab/psr.hpp"
#include "geclab/psr_certify.hpp"
#include "geclab/simulate.hpp"
#include "helpers.hpp"

using namespace geclab;

namespace {

// Chain-rule probability of an identity-emission trajectory.
double chain_probability(const TabularPOMDP& p, const Trajectory& tau) {
  double prob = p.initial()[tau.observations[0]];
  for (int k = 0; k + 1 < p.horizon(); ++k) {
    prob *= p.transition(k, tau.actions[k])(tau.observations[k + 1], tau.observations[k]);
  }
  return prob;
}

// Forward-filter prediction of o_k given the prefix.
Eigen::VectorXd belief_prediction(const TabularPOMDP& p, const std::vector<int>& obs, const std::vector<int>& acts,
                                  int action) {
  Eigen::VectorXd b = p.initial();
  for (std::size_t k = 0; k < obs.size(); ++k) {
    b = b.cwiseProduct(p.emission(static_cast<int>(k)).row(obs[k]).transpose());
    b = p.transition(static_cast<int>(k), acts[k]) * b;
  }
  (void)action;
  const Eigen::VectorXd o = p.emission(static_cast<int>(obs.size())) * b;
  return o / o.sum();
}

}  // namespace

TEST_CASE("identity-emission embedding reproduces the MDP chain") {
  for (int i = 0; i < 10; ++i) {
    CounterRng g = testutil::rng_for(20, i);
    const TabularPOMDP pomdp = random_identity_pomdp(3, 2, 3, g);
    const OperatorPsr psr = psr_from_weakly_revealing_pomdp(pomdp, 1);
    for (const auto& tau : oracle::all_sequences(3, 3, 2)) {
      CHECK(std::abs(dynamics_probability(psr, tau) - chain_probability(pomdp, tau)) <= 1e-10);
    }
    CHECK(certify_psr(psr, &pomdp).rank <= 3);
  }
}

TEST_CASE("weakly revealing embeddings match the forward algorithm on sampled trajectories") {
  for (int i = 0; i < 5; ++i) {
    CounterRng g = testutil::rng_for(21, i);
    const TabularPOMDP pomdp = random_weakly_revealing_pomdp(2, 3, 2, 3, g);
    const OperatorPsr psr = psr_from_weakly_revealing_pomdp(pomdp, 1);
    const HistoryPolicy pi = HistoryPolicy::uniform(3, 3, 2);
    for (int s = 0; s < 200; ++s) {
      const Trajectory tau = sample_episode(pomdp, pi, g);
      CHECK(std::abs(dynamics_probability(psr, tau) - oracle::latent_path_probability(pomdp, tau)) <= 1e-10);
    }
  }
}

TEST_CASE("two-step core tests embed a POMDP that needs them") {
  CounterRng g = testutil::rng_for(22);
  const TabularPOMDP pomdp = random_pomdp(3, 2, 2, 3, g);
  const OperatorPsr psr = psr_from_weakly_revealing_pomdp(pomdp, 2);
  for (const auto& tau : oracle::all_sequences(3, 2, 2)) {
    CHECK(std::abs(dynamics_probability(psr, tau) - oracle::latent_path_probability(pomdp, tau)) <= 1e-10);
  }
  const PsrCertificate cert = certify_psr(psr, &pomdp);
  const int u_a = psr.core().max_action_sequences();
  CHECK(u_a <= 2);  // A^(m-1)
  CHECK(cert.delta_bound <= u_a + 1e-9);
}

TEST_CASE("decodable embeddings: block MDP and a one-step horizon") {
  CounterRng g = testutil::rng_for(23);
  const TabularPOMDP block = random_block_mdp(2, 2, 2, 3, g);
  const OperatorPsr psr = psr_from_decodable_pomdp(block, infer_decoder(block, 1));
  CHECK(check_generalized_regular(psr).alpha >= 1.0 - 1e-12);
  for (const auto& tau : oracle::all_sequences(3, block.num_observations(), 2)) {
    CHECK(std::abs(dynamics_probability(psr, tau) - oracle::latent_path_probability(block, tau)) <= 1e-10);
  }

  const TabularPOMDP short_block = random_block_mdp(2, 2, 2, 1, g);
  const OperatorPsr one = psr_from_decodable_pomdp(short_block, infer_decoder(short_block, 1));
  const Eigen::VectorXd law = short_block.emission(0) * short_block.initial();
  for (int i = 0; i < one.core().size(0); ++i) {
    const int o = one.core().tests(0)[i].observations.front();
    CHECK(one.q0()[i] == doctest::Approx(law[o]).epsilon(1e-14));
  }
}

TEST_CASE("a wrong decoder is rejected") {
  CounterRng g = testutil::rng_for(24);
  const TabularPOMDP block = random_block_mdp(2, 2, 2, 2, g);
  Decoder dec = infer_decoder(block, 1);
  for (auto& step : dec.table) {
    for (auto& s : step) {
      if (s >= 0) s = 1 - s;
    }
  }
  CHECK_THROWS_AS(verify_decoder(block, dec), DecoderError);
}

TEST_CASE("latent MDP reduction") {
  CounterRng g = testutil::rng_for(25);
  const TabularMDP m = random_mdp(2, 2, 2, g);
  const TabularPOMDP single = latent_mdp_to_pomdp({m}, testutil::vec({1.0}));
  CHECK(single.num_states() == 2);
  const TabularPOMDP twin = latent_mdp_to_pomdp({m, m}, testutil::vec({0.5, 0.5}));
  CHECK(twin.num_states() == 4);
  for (const auto& tau : oracle::all_sequences(2, 2, 2)) {
    const double p = dynamics_probability(m, tau);
    CHECK(std::abs(dynamics_probability(single, tau) - p) <= 1e-12);
    CHECK(std::abs(dynamics_probability(twin, tau) - p) <= 1e-12);
  }
}

TEST_CASE("psr trajectory probability under a policy") {
  CounterRng g = testutil::rng_for(26);
  const TabularPOMDP pomdp = random_identity_pomdp(2, 2, 3, g);
  const OperatorPsr psr = psr_from_weakly_revealing_pomdp(pomdp, 1);
  const HistoryPolicy pi = random_memory_policy(1, 3, 2, 2, g);
  const HistoryPolicy uniform = HistoryPolicy::uniform(3, 2, 2);
  double total = 0.0;
  for (const auto& tau : oracle::all_sequences(3, 2, 2)) {
    const double p = psr_trajectory_probability(psr, tau, pi);
    CHECK(p >= 0.0);
    CHECK(std::abs(p - chain_probability(pomdp, tau) * policy_probability(pi, tau)) <= 1e-12);
    total += psr_trajectory_probability(psr, tau, uniform);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("conditional next observation: belief agreement and completion independence") {
  CounterRng g = testutil::rng_for(27);
  const TabularPOMDP pomdp = random_weakly_revealing_pomdp(2, 3, 2, 3, g);
  const OperatorPsr psr = psr_from_weakly_revealing_pomdp(pomdp, 1);
  const std::vector<int> completion{1, 1, 1};
  const auto alt = psr.normalizers(completion);
  for (int i = 0; i < 50; ++i) {
    const Trajectory tau = sample_episode(pomdp, HistoryPolicy::uniform(3, 3, 2), g);
    const int k = static_cast<int>(g() % 3);
    const std::vector<int> obs(tau.observations.begin(), tau.observations.begin() + k);
    const std::vector<int> acts(tau.actions.begin(), tau.actions.begin() + k);
    const int a = tau.actions[k];
    const Eigen::VectorXd c = conditional_next_obs(psr, obs, acts, a);
    CHECK(c.sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK((c - belief_prediction(pomdp, obs, acts, a)).cwiseAbs().maxCoeff() <= 1e-8);
    // Same quantity with the all-ones completion.
    Eigen::VectorXd q = psr.q0();
    for (int j = 0; j < k; ++j) q = psr.op(j, obs[j], acts[j]) * q;
    Eigen::VectorXd other(3);
    for (int o = 0; o < 3; ++o) other[o] = alt[k + 1].dot(psr.op(k, o, a) * q);
    other /= other.sum();
    CHECK((c - other).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("deterministic PSR predicts a point mass") {
  std::vector<Eigen::MatrixXd> r(2, Eigen::MatrixXd::Zero(2, 2));
  const TabularPOMDP pomdp = as_pomdp(testutil::deterministic_mdp(2, 2, 2, r));
  const OperatorPsr psr = psr_from_weakly_revealing_pomdp(pomdp, 1);
  const std::vector<int> obs{0}, acts{1};
  const Eigen::VectorXd c = conditional_next_obs(psr, obs, acts, 0);
  CHECK(c[1] == doctest::Approx(1.0));
  CHECK(c[0] == doctest::Approx(0.0));
}

TEST_CASE("generalized regularity of a one-step scalar PSR") {
  const CoreTestSet core({{CoreTest{{0}, {}}}, {CoreTest{{}, {}}}});
  const auto make = [&](double m) {
    return OperatorPsr(core, 1, 1, testutil::vec({1.0}), {{{Eigen::MatrixXd::Constant(1, 1, m)}}},
                       {Eigen::MatrixXd::Zero(1, 1)});
  };
  const GeneralizedRegularity two = check_generalized_regular(make(2.0));
  CHECK(two.condition1.front() == doctest::Approx(2.0));
  CHECK(two.alpha == doctest::Approx(0.5));
  // Scaling the operator by c scales condition 1 by c.
  const GeneralizedRegularity six = check_generalized_regular(make(6.0));
  CHECK(six.condition1.front() == doctest::Approx(3.0 * two.condition1.front()));
}

TEST_CASE("regularity from explicit core matrices") {
  Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(3, 3);
  perm(0, 2) = perm(1, 0) = perm(2, 1) = 1.0;
  CHECK(regular_alpha_from_core(perm) == doctest::Approx(1.0));
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 0.1;
  CHECK(regular_alpha_from_core(d) == doctest::Approx(0.1));
}

TEST_CASE("certificates: identity, decodable and regular instances") {
  for (int i = 0; i < 10; ++i) {
    CounterRng g = testutil::rng_for(28, i);
    const TabularPOMDP id = random_identity_pomdp(3, 2, 3, g);
    CHECK(check_generalized_regular(psr_from_weakly_revealing_pomdp(id, 1)).alpha >= 1.0 / std::sqrt(3.0) - 1e-12);

    const TabularPOMDP inv = random_invertible_emission_pomdp(2, 2, 3, g);
    const OperatorPsr minimal = psr_with_minimal_core(inv);
    CHECK(check_generalized_regular(minimal).alpha >= check_regular(minimal).alpha - 1e-9);

    const TabularPOMDP wr = random_weakly_revealing_pomdp(2, 3, 2, 3, g);
    const PsrCertificate cert = certify_psr(psr_from_weakly_revealing_pomdp(wr, 1), &wr);
    CHECK(cert.delta_bound <= 1.0 + 1e-9);  // U_A = 1 for one-step tests
    CHECK(cert.rank <= 2);
  }
}

TEST_CASE("rank of a deterministic identity-emission POMDP counts reachable states") {
  std::vector<Eigen::MatrixXd> r(3, Eigen::MatrixXd::Zero(3, 2));
  const TabularPOMDP pomdp = as_pomdp(testutil::deterministic_mdp(3, 2, 3, r));
  const PsrCertificate cert = certify_psr(psr_from_weakly_revealing_pomdp(pomdp, 1), &pomdp);
  // After one or more transitions only states 0 and 1 are reachable.
  CHECK(cert.rank_per_step[0] == 2);
  CHECK(cert.rank_per_step[1] == 2);
}

TEST_CASE("psr JSON round trip") {
  CounterRng g = testutil::rng_for(29);
  const TabularPOMDP pomdp = random_weakly_revealing_pomdp(2, 3, 2, 2, g);
  const OperatorPsr psr = psr_from_weakly_revealing_pomdp(pomdp, 1);
  const OperatorPsr back = psr_from_json(psr_to_json(psr));
  for (const auto& tau : oracle::all_sequences(2, 3, 2)) {
    CHECK(dynamics_probability(back, tau) == doctest::Approx(dynamics_probability(psr, tau)).epsilon(1e-15));
  }
}
