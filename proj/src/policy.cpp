#include "geclab/policy.hpp"

#include <algorithm>
#include <sstream>

#include "geclab/errors.hpp"

namespace geclab {
namespace {

std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

void check_rows_stochastic(const Eigen::MatrixXd& t, int step) {
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    if (t.row(r).minCoeff() < 0.0 || std::abs(t.row(r).sum() - 1.0) > 1e-9) {
      std::ostringstream msg;
      msg << "policy table at step " << step << " row " << r << " is not a distribution";
      throw ModelError(msg.str());
    }
  }
}

}  // namespace

std::int64_t memory_context_count(int step, int memory, int num_obs, int num_actions) {
  return ipow(static_cast<std::int64_t>(num_obs) * num_actions, std::min(step, memory)) * num_obs;
}

std::int64_t memory_context_code(const HistoryView& history, int memory, int num_obs,
                                 int num_actions) {
  const int k = history.step();
  const int first = std::max(0, k - memory);
  std::int64_t code = 0;
  for (int j = first; j < k; ++j) {
    code = code * num_obs * num_actions + history.observations[j] * num_actions +
           history.actions[j];
  }
  return code * num_obs + history.observations[k];
}

std::int64_t next_pairs_code(std::int64_t pairs_code, int step, int memory, int num_obs,
                             int num_actions, int obs, int action) {
  if (memory == 0) return 0;
  const std::int64_t radix = static_cast<std::int64_t>(num_obs) * num_actions;
  const std::int64_t pair = static_cast<std::int64_t>(obs) * num_actions + action;
  if (std::min(step, memory) < memory) return pairs_code * radix + pair;
  return (pairs_code % ipow(radix, memory - 1)) * radix + pair;
}

HistoryPolicy HistoryPolicy::markov(std::vector<Eigen::MatrixXd> tables) {
  if (tables.empty()) throw ModelError("policy needs at least one step");
  HistoryPolicy p;
  p.kind_ = PolicyKind::kMarkov;
  p.horizon_ = static_cast<int>(tables.size());
  p.num_obs_ = static_cast<int>(tables.front().rows());
  p.num_actions_ = static_cast<int>(tables.front().cols());
  for (std::size_t k = 0; k < tables.size(); ++k) {
    if (tables[k].rows() != p.num_obs_ || tables[k].cols() != p.num_actions_) {
      throw ModelError("markov policy table has wrong shape");
    }
    check_rows_stochastic(tables[k], static_cast<int>(k));
  }
  p.tables_ = std::move(tables);
  return p;
}

HistoryPolicy HistoryPolicy::memory(int memory, int num_obs, int num_actions,
                                    std::vector<Eigen::MatrixXd> tables) {
  if (tables.empty()) throw ModelError("policy needs at least one step");
  if (memory < 0) throw ModelError("memory length must be nonnegative");
  HistoryPolicy p;
  p.kind_ = PolicyKind::kMemory;
  p.horizon_ = static_cast<int>(tables.size());
  p.num_obs_ = num_obs;
  p.num_actions_ = num_actions;
  p.memory_ = memory;
  for (std::size_t k = 0; k < tables.size(); ++k) {
    const auto rows = memory_context_count(static_cast<int>(k), memory, num_obs, num_actions);
    if (tables[k].rows() != rows || tables[k].cols() != num_actions) {
      throw ModelError("memory policy table has wrong shape");
    }
    check_rows_stochastic(tables[k], static_cast<int>(k));
  }
  p.tables_ = std::move(tables);
  return p;
}

HistoryPolicy HistoryPolicy::greedy(const std::vector<Eigen::MatrixXd>& q) {
  std::vector<Eigen::MatrixXd> tables;
  for (const auto& qk : q) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(qk.rows(), qk.cols());
    for (Eigen::Index x = 0; x < qk.rows(); ++x) {
      Eigen::Index best = 0;
      for (Eigen::Index a = 1; a < qk.cols(); ++a) {
        if (qk(x, a) > qk(x, best)) best = a;
      }
      t(x, best) = 1.0;
    }
    tables.push_back(std::move(t));
  }
  HistoryPolicy p = markov(std::move(tables));
  p.kind_ = PolicyKind::kGreedy;
  return p;
}

HistoryPolicy HistoryPolicy::uniform(int horizon, int num_obs, int num_actions) {
  std::vector<Eigen::MatrixXd> tables(
      horizon, Eigen::MatrixXd::Constant(num_obs, num_actions, 1.0 / num_actions));
  return markov(std::move(tables));
}

Eigen::VectorXd HistoryPolicy::distribution(const HistoryView& history) const {
  const int k = history.step();
  if (k < 0 || k >= horizon_) throw ModelError("policy queried outside its horizon");
  switch (kind_) {
    case PolicyKind::kMarkov:
    case PolicyKind::kGreedy:
      return tables_[k].row(history.observations[k]).transpose();
    case PolicyKind::kMemory:
      return tables_[k]
          .row(memory_context_code(history, memory_, num_obs_, num_actions_))
          .transpose();
    case PolicyKind::kComposed:
      return composed_distribution(history);
  }
  return {};
}

int HistoryPolicy::sample_action(const HistoryView& history, CounterRng& rng) const {
  const Eigen::VectorXd d = distribution(history);
  return sample_index(std::span<const double>(d.data(), d.size()), rng);
}

Eigen::VectorXd HistoryPolicy::composed_distribution(const HistoryView& history) const {
  const Composition& c = *composition_;
  const int k = history.step();
  if (k == c.uniform_step) return Eigen::VectorXd::Constant(num_actions_, 1.0 / num_actions_);
  if (c.sequence_start < 0 || k < c.sequence_start || c.sequences.empty()) {
    return c.base->distribution(history);
  }
  // Posterior over the drawn sequence given the actions already taken.
  const int offset = k - c.sequence_start;
  Eigen::VectorXd result = Eigen::VectorXd::Zero(num_actions_);
  Eigen::VectorXd base_here;
  double total = 0.0;
  for (const auto& seq : c.sequences) {
    const int len = static_cast<int>(seq.size());
    const int checked = std::min(len, offset);
    bool consistent = true;
    for (int j = 0; j < checked && consistent; ++j) {
      consistent = history.actions[c.sequence_start + j] == seq[j];
    }
    if (!consistent) continue;
    double weight = 1.0;
    for (int j = c.sequence_start + len; j < k && weight > 0.0; ++j) {
      HistoryView prefix{history.observations.subspan(0, j + 1), history.actions.subspan(0, j)};
      weight *= c.base->distribution(prefix)[history.actions[j]];
    }
    if (weight <= 0.0) continue;
    total += weight;
    if (offset < len) {
      result[seq[offset]] += weight;
    } else {
      if (base_here.size() == 0) base_here = c.base->distribution(history);
      result += weight * base_here;
    }
  }
  if (total <= 0.0) return c.base->distribution(history);
  return result / total;
}

HistoryPolicy compose_exploration(const HistoryPolicy& base, int h, ExplorationKind kind,
                                  std::vector<std::vector<int>> sequences) {
  const int horizon = base.horizon();
  if (kind == ExplorationKind::kQType) {
    if (h < 1 || h > horizon) throw ModelError("exploration index out of range");
    return base;
  }
  auto comp = std::make_shared<HistoryPolicy::Composition>();
  comp->base = std::make_shared<const HistoryPolicy>(base);
  if (kind == ExplorationKind::kVType) {
    if (h < 1 || h > horizon) throw ModelError("exploration index out of range");
    comp->uniform_step = h - 1;
  } else {
    if (h < 0 || h > horizon - 1) throw ModelError("exploration index out of range");
    comp->uniform_step = h - 1;
    comp->sequence_start = h;
    for (const auto& seq : sequences) {
      for (int a : seq) {
        if (a < 0 || a >= base.num_actions()) throw ModelError("sequence action out of range");
      }
    }
    comp->sequences = std::move(sequences);
  }
  HistoryPolicy p;
  p.kind_ = PolicyKind::kComposed;
  p.horizon_ = horizon;
  p.num_obs_ = base.num_observations();
  p.num_actions_ = base.num_actions();
  p.memory_ = horizon;
  p.composition_ = std::move(comp);
  return p;
}

}  // namespace geclab
