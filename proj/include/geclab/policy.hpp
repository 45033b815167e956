#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "geclab/models.hpp"
#include "geclab/rng.hpp"

namespace geclab {

enum class PolicyKind { kMarkov, kMemory, kComposed, kGreedy };

enum class ExplorationKind { kQType, kVType, kPsrType };

// Number of memory contexts zbar_k at 0-based step k: (O*A)^min(k, M) * O.
std::int64_t memory_context_count(int step, int memory, int num_obs, int num_actions);

// Mixed-radix code of zbar_k: the last min(k, M) (o, a) pairs followed by o_k.
std::int64_t memory_context_code(const HistoryView& history, int memory, int num_obs,
                                 int num_actions);

// Code of the pair part z_k after appending (o, a) to the pairs code at step k.
std::int64_t next_pairs_code(std::int64_t pairs_code, int step, int memory, int num_obs,
                             int num_actions, int obs, int action);

// History-dependent stochastic policy. Every query returns a distribution over
// actions for the given prefix.
class HistoryPolicy {
 public:
  HistoryPolicy() = default;

  // tables[k] is O x A with rows on the simplex.
  static HistoryPolicy markov(std::vector<Eigen::MatrixXd> tables);
  // tables[k] is memory_context_count(k) x A.
  static HistoryPolicy memory(int memory, int num_obs, int num_actions,
                              std::vector<Eigen::MatrixXd> tables);
  // q[k] is O x A; ties go to the lowest action index.
  static HistoryPolicy greedy(const std::vector<Eigen::MatrixXd>& q);
  static HistoryPolicy uniform(int horizon, int num_obs, int num_actions);

  PolicyKind kind() const { return kind_; }
  int horizon() const { return horizon_; }
  int num_observations() const { return num_obs_; }
  int num_actions() const { return num_actions_; }
  int memory_length() const { return memory_; }

  Eigen::VectorXd distribution(const HistoryView& history) const;
  int sample_action(const HistoryView& history, CounterRng& rng) const;

  // Table access for table-backed kinds.
  const std::vector<Eigen::MatrixXd>& tables() const { return tables_; }

  friend HistoryPolicy compose_exploration(const HistoryPolicy& base, int h, ExplorationKind kind,
                                           std::vector<std::vector<int>> sequences);

 private:
  struct Composition {
    std::shared_ptr<const HistoryPolicy> base;
    int uniform_step = -1;
    int sequence_start = -1;
    std::vector<std::vector<int>> sequences;
  };

  Eigen::VectorXd composed_distribution(const HistoryView& history) const;

  PolicyKind kind_ = PolicyKind::kMarkov;
  int horizon_ = 0;
  int num_obs_ = 0;
  int num_actions_ = 0;
  int memory_ = 0;
  std::vector<Eigen::MatrixXd> tables_;
  std::shared_ptr<const Composition> composition_;
};

// Exploration policy pi_exp(f, h) with a 1-based stage index h.
//  q-type: the base policy itself, h in [1, H].
//  v-type: uniform action at stage h, base elsewhere, h in [1, H].
//  psr-type: uniform at stage h (none when h = 0), then an action sequence
//  drawn uniformly from `sequences` starting at stage h + 1, then the base
//  policy again; h in [0, H - 1].
HistoryPolicy compose_exploration(const HistoryPolicy& base, int h, ExplorationKind kind,
                                  std::vector<std::vector<int>> sequences = {});

}  // namespace geclab
