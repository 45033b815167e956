#include <doctest.h>

#include <cmath>
#include <limits>

#include "geclab/divergences.hpp"
#include "geclab/generators.hpp"
#include "helpers.hpp"

using namespace geclab;
using testutil::vec;

TEST_CASE("hellinger: identical, disjoint and Bernoulli cases") {
  const Eigen::VectorXd p = vec({0.2, 0.3, 0.5});
  CHECK(hellinger_squared(p, p) == doctest::Approx(0.0));
  CHECK(hellinger_squared(vec({1, 0}), vec({0, 1})) == doctest::Approx(1.0));
  const double h = hellinger_squared(vec({0.5, 0.5}), vec({0.9, 0.1}));
  CHECK(h == doctest::Approx(1.0 - (std::sqrt(0.45) + std::sqrt(0.05))).epsilon(1e-14));
  CHECK(h == doctest::Approx(0.10557).epsilon(1e-4));
}

TEST_CASE("total variation and kl") {
  const Eigen::VectorXd p = vec({0.1, 0.6, 0.3});
  CHECK(total_variation(p, p) == doctest::Approx(0.0));
  CHECK(kl(p, p) == doctest::Approx(0.0));
  CHECK(total_variation(vec({1, 0}), vec({0, 1})) == doctest::Approx(1.0));
  CHECK(kl(vec({1, 0}), vec({0, 1})) == std::numeric_limits<double>::infinity());
  CHECK(total_variation(vec({0.25, 0.75}), vec({0.75, 0.25})) == doctest::Approx(0.5));
  // Natural log.
  const double expected = 0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75);
  CHECK(kl(vec({0.5, 0.5}), vec({0.25, 0.75})) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("kl treats underflowing q entries as zero mass") {
  CHECK(kl(vec({0.5, 0.5}), vec({1.0 - 1e-310, 1e-310})) == std::numeric_limits<double>::infinity());
}

TEST_CASE("expected conditional hellinger on a product table equals the marginal value") {
  // P = Px (x) Py, Q = Px (x) Qy: every conditional is Py vs Qy.
  const Eigen::VectorXd px = vec({0.3, 0.7}), py = vec({0.5, 0.5}), qy = vec({0.9, 0.1});
  const Eigen::MatrixXd pj = px * py.transpose(), qj = px * qy.transpose();
  CHECK(expected_conditional_hellinger(pj, qj) == doctest::Approx(hellinger_squared(py, qy)).epsilon(1e-14));
}

TEST_CASE("property: l1, conditional and sandwich relations on random pairs") {
  for (int i = 0; i < 2000; ++i) {
    CounterRng rng = testutil::rng_for(1, i);
    const int n = 2 + static_cast<int>(rng() % 6);
    const Eigen::VectorXd p = random_simplex(n, rng, 0.5), q = random_simplex(n, rng, 0.5);
    const double h2 = hellinger_squared(p, q), tv = total_variation(p, q);
    const double l1 = (p - q).cwiseAbs().sum();
    CHECK(l1 * l1 <= 8.0 * h2 + 1e-9);
    CHECK(h2 <= tv + 1e-12);
    CHECK(tv <= std::sqrt(2.0) * std::sqrt(h2) + 1e-12);
    CHECK(kl(p, q) >= -1e-12);

    const Eigen::VectorXd pj = random_simplex(6, rng), qj = random_simplex(6, rng);
    const Eigen::MatrixXd pm = Eigen::Map<const Eigen::MatrixXd>(pj.data(), 2, 3);
    const Eigen::MatrixXd qm = Eigen::Map<const Eigen::MatrixXd>(qj.data(), 2, 3);
    CHECK(expected_conditional_hellinger(pm, qm) <= 4.0 * hellinger_squared(pj, qj) + 1e-9);
  }
}
