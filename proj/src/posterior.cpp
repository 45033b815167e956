#include "geclab/posterior.hpp"

#include <cmath>
#include <limits>

#include "geclab/errors.hpp"

namespace geclab {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Shift by the maximum and divide by the sum; subtracting a large log
// normalizer instead would lose digits once |log weights| is big.
Eigen::VectorXd exp_normalized(const Eigen::VectorXd& logs) {
  const double m = logs.size() > 0 ? logs.maxCoeff() : kNegInf;
  if (!std::isfinite(m)) throw ModelError("posterior has no mass");
  Eigen::VectorXd p(logs.size());
  for (Eigen::Index i = 0; i < logs.size(); ++i) p[i] = std::exp(logs[i] - m);
  return p / p.sum();
}

}  // namespace

double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return kNegInf;
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

std::vector<Eigen::VectorXd> PosteriorState::backward_messages() const {
  const int h = horizon();
  std::vector<Eigen::VectorXd> msg(h);
  msg[h - 1] = last_log;
  for (int k = h - 2; k >= 0; --k) {
    const Eigen::MatrixXd& pk = pair_log[k];
    msg[k].resize(pk.rows());
    for (Eigen::Index i = 0; i < pk.rows(); ++i) {
      msg[k][i] = log_sum_exp(pk.row(i).transpose() + msg[k + 1]);
    }
  }
  return msg;
}

double PosteriorState::log_normalizer() const {
  if (form == PosteriorForm::kJoint) return log_sum_exp(log_weights);
  return log_sum_exp(first_log + backward_messages().front());
}

Eigen::VectorXd PosteriorState::probabilities() const {
  if (form != PosteriorForm::kJoint) throw ModelError("probabilities() needs the joint form");
  return exp_normalized(log_weights);
}

std::vector<Eigen::VectorXd> PosteriorState::marginals() const {
  if (form == PosteriorForm::kJoint) return {probabilities()};
  const int h = horizon();
  const auto back = backward_messages();
  const double z = log_sum_exp(first_log + back.front());
  if (!std::isfinite(z)) throw ModelError("posterior has no mass");
  std::vector<Eigen::VectorXd> fwd(h);
  fwd[0] = first_log;
  for (int k = 0; k + 1 < h; ++k) {
    const Eigen::MatrixXd& pk = pair_log[k];
    fwd[k + 1].resize(pk.cols());
    for (Eigen::Index j = 0; j < pk.cols(); ++j) fwd[k + 1][j] = log_sum_exp(fwd[k] + pk.col(j));
  }
  std::vector<Eigen::VectorXd> out(h);
  for (int k = 0; k < h; ++k) out[k] = exp_normalized(fwd[k] + back[k]);
  return out;
}

double PosteriorState::probability(std::span<const int> index) const {
  if (form == PosteriorForm::kJoint) return probabilities()[index[0]];
  const auto back = backward_messages();
  const double z = log_sum_exp(first_log + back.front());
  double logp = first_log[index[0]] + back[0][index[0]] - z;
  for (int k = 0; k + 1 < horizon(); ++k) {
    const int i = index[k], j = index[k + 1];
    logp += pair_log[k](i, j) + back[k + 1][j] - back[k][i];
  }
  return std::exp(logp);
}

std::vector<int> PosteriorState::sample(CounterRng& rng) const {
  if (form == PosteriorForm::kJoint) {
    const Eigen::VectorXd p = probabilities();
    return {sample_index(std::span<const double>(p.data(), p.size()), rng)};
  }
  const auto back = backward_messages();
  std::vector<int> out(horizon());
  Eigen::VectorXd p0 = exp_normalized(first_log + back.front());
  out[0] = sample_index(std::span<const double>(p0.data(), p0.size()), rng);
  for (int k = 0; k + 1 < horizon(); ++k) {
    const Eigen::VectorXd cond = exp_normalized(pair_log[k].row(out[k]).transpose() + back[k + 1]);
    out[k + 1] = sample_index(std::span<const double>(cond.data(), cond.size()), rng);
  }
  return out;
}

}  // namespace geclab
