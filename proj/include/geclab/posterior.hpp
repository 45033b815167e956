#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "geclab/rng.hpp"

namespace geclab {

double log_sum_exp(const Eigen::VectorXd& v);

enum class PosteriorForm { kJoint, kChain };

// Posterior over a hypothesis class. The joint form holds one unnormalized
// log weight per member. The chain form factors over steps:
//   log p(f) = first(f_0) + sum_{k < H-1} pair[k](f_k, f_{k+1}) + last(f_{H-1}) - log Z.
struct PosteriorState {
  PosteriorForm form = PosteriorForm::kJoint;
  double gamma = 0.0;
  double eta = 0.0;

  Eigen::VectorXd log_weights;

  Eigen::VectorXd first_log;
  std::vector<Eigen::MatrixXd> pair_log;
  Eigen::VectorXd last_log;

  int horizon() const { return form == PosteriorForm::kJoint ? 1 : static_cast<int>(pair_log.size()) + 1; }

  // Joint form only.
  Eigen::VectorXd probabilities() const;

  // Per-step marginals by forward-backward (chain) or the single joint vector.
  std::vector<Eigen::VectorXd> marginals() const;

  // Probability the sampler assigns to a member (joint: {index}; chain: tuple).
  double probability(std::span<const int> index) const;

  // Draw a member; chain form samples f_0 then each f_{k+1} given f_k.
  std::vector<int> sample(CounterRng& rng) const;

  double log_normalizer() const;

 private:
  std::vector<Eigen::VectorXd> backward_messages() const;
};

}  // namespace geclab
