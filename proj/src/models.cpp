#include "geclab/models.hpp"

#include <sstream>

#include "geclab/errors.hpp"

namespace geclab {
namespace {

void check_distribution(const Eigen::VectorXd& p, const std::string& where) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) {
      std::ostringstream msg;
      msg << where << " has negative entry " << p[i] << " at index " << i;
      throw ModelError(msg.str());
    }
    total += p[i];
  }
  if (std::abs(total - 1.0) > kStochasticTolerance) {
    std::ostringstream msg;
    msg.precision(12);
    msg << where << " sums to " << total;
    throw ModelError(msg.str());
  }
}

void check_transitions(const std::vector<std::vector<Eigen::MatrixXd>>& transitions, int states) {
  if (transitions.empty()) throw ModelError("horizon must be at least 1");
  const std::size_t actions = transitions.front().size();
  if (actions == 0) throw ModelError("at least one action is required");
  for (std::size_t k = 0; k < transitions.size(); ++k) {
    if (transitions[k].size() != actions) throw ModelError("action count differs across steps");
    for (std::size_t a = 0; a < actions; ++a) {
      const auto& t = transitions[k][a];
      if (t.rows() != states || t.cols() != states) {
        throw ModelError("transition matrix has wrong shape");
      }
      for (int s = 0; s < states; ++s) {
        std::ostringstream where;
        where << "transitions[step=" << k << "][action=" << a << "][state=" << s << "]";
        check_distribution(t.col(s), where.str());
      }
    }
  }
}

void check_rewards(const std::vector<Eigen::MatrixXd>& rewards, std::size_t horizon, int rows,
                   int actions) {
  if (rewards.size() != horizon) throw ModelError("rewards must have one table per step");
  for (std::size_t k = 0; k < horizon; ++k) {
    if (rewards[k].rows() != rows || rewards[k].cols() != actions) {
      throw ModelError("reward table has wrong shape");
    }
    if (rewards[k].minCoeff() < 0.0) {
      std::ostringstream msg;
      msg << "rewards[step=" << k << "] has a negative entry";
      throw ModelError(msg.str());
    }
  }
  const double budget = reward_budget(rewards);
  if (budget > 1.0 + kStochasticTolerance) {
    std::ostringstream msg;
    msg.precision(12);
    msg << "reward budget sum_h max R_h is " << budget << " > 1";
    throw ModelError(msg.str());
  }
}

}  // namespace

double reward_budget(const std::vector<Eigen::MatrixXd>& rewards) {
  double total = 0.0;
  for (const auto& r : rewards) total += r.size() > 0 ? r.maxCoeff() : 0.0;
  return total;
}

TabularMDP::TabularMDP(std::vector<std::vector<Eigen::MatrixXd>> transitions,
                       std::vector<Eigen::MatrixXd> rewards, Eigen::VectorXd initial)
    : transitions_(std::move(transitions)), rewards_(std::move(rewards)), initial_(std::move(initial)) {
  const int s = static_cast<int>(initial_.size());
  if (s == 0) throw ModelError("at least one state is required");
  check_distribution(initial_, "initial");
  check_transitions(transitions_, s);
  check_rewards(rewards_, transitions_.size(), s, num_actions());
}

Eigen::VectorXd TabularMDP::observation_joint(int, const Eigen::VectorXd& filter, int) const {
  return filter;
}

Eigen::VectorXd TabularMDP::advance(int step, const Eigen::VectorXd& filter, int obs,
                                    int action) const {
  return transitions_[step][action].col(obs) * filter[obs];
}

double TabularMDP::prefix_mass(int, const Eigen::VectorXd& filter) const { return filter.sum(); }

TabularPOMDP::TabularPOMDP(std::vector<std::vector<Eigen::MatrixXd>> transitions,
                           std::vector<Eigen::MatrixXd> emissions,
                           std::vector<Eigen::MatrixXd> rewards, Eigen::VectorXd initial)
    : transitions_(std::move(transitions)),
      emissions_(std::move(emissions)),
      rewards_(std::move(rewards)),
      initial_(std::move(initial)) {
  const int s = static_cast<int>(initial_.size());
  if (s == 0) throw ModelError("at least one state is required");
  check_distribution(initial_, "initial");
  check_transitions(transitions_, s);
  if (emissions_.size() != transitions_.size()) {
    throw ModelError("emissions must have one matrix per step");
  }
  const Eigen::Index o = emissions_.front().rows();
  if (o == 0) throw ModelError("at least one observation is required");
  for (std::size_t k = 0; k < emissions_.size(); ++k) {
    if (emissions_[k].rows() != o || emissions_[k].cols() != s) {
      throw ModelError("emission matrix has wrong shape");
    }
    for (int st = 0; st < s; ++st) {
      std::ostringstream where;
      where << "emissions[step=" << k << "][state=" << st << "]";
      check_distribution(emissions_[k].col(st), where.str());
    }
  }
  check_rewards(rewards_, transitions_.size(), static_cast<int>(o), num_actions());
}

Eigen::VectorXd TabularPOMDP::observation_joint(int step, const Eigen::VectorXd& filter,
                                                int) const {
  return emissions_[step] * filter;
}

Eigen::VectorXd TabularPOMDP::advance(int step, const Eigen::VectorXd& filter, int obs,
                                      int action) const {
  Eigen::VectorXd weighted = emissions_[step].row(obs).transpose().cwiseProduct(filter);
  return transitions_[step][action] * weighted;
}

double TabularPOMDP::prefix_mass(int, const Eigen::VectorXd& filter) const { return filter.sum(); }

TabularPOMDP as_pomdp(const TabularMDP& mdp) {
  std::vector<std::vector<Eigen::MatrixXd>> t(mdp.horizon());
  std::vector<Eigen::MatrixXd> e, r;
  for (int k = 0; k < mdp.horizon(); ++k) {
    for (int a = 0; a < mdp.num_actions(); ++a) t[k].push_back(mdp.transition(k, a));
    e.push_back(Eigen::MatrixXd::Identity(mdp.num_states(), mdp.num_states()));
    r.push_back(mdp.rewards(k));
  }
  return TabularPOMDP(std::move(t), std::move(e), std::move(r), mdp.initial());
}

}  // namespace geclab
