#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "geclab/models.hpp"
#include "geclab/psr.hpp"

namespace geclab {

inline constexpr std::int64_t kDefaultColumnCap = 100000;

struct GeneralizedRegularity {
  double alpha = 0.0;
  // condition1[k]: sup over the l1 ball of the worst-policy trajectory mass, steps 0..H-1.
  std::vector<double> condition1;
  // condition2[k]: sup over the l1 ball of the one-step mass, steps 0..H-2.
  std::vector<double> condition2;
  int binding_step = -1;
  int binding_condition = 0;
};

// Largest alpha for which both regularity conditions hold, found by exact
// tree enumeration at signed unit vectors. Policies choose a_k after o_k.
GeneralizedRegularity check_generalized_regular(const OperatorPsr& psr);

// Dbar_k = [P(t | tau_k)] for t in U_k and every history tau_k of length k
// (columns in mixed-radix order). Unreachable histories give zero columns.
Eigen::MatrixXd system_dynamics_matrix(const OperatorPsr& psr, int step,
                                       std::int64_t column_cap = kDefaultColumnCap);

struct Regularity {
  double alpha = 0.0;
  // inverse_norms[k] = ||K_k^+||_1 for k = 0..H-1.
  std::vector<double> inverse_norms;
  // Column indices of the core histories chosen at each step.
  std::vector<std::vector<int>> core_histories;
};

// 1 / ||K^+||_1.
double regular_alpha_from_core(const Eigen::MatrixXd& core_matrix);

// Core histories picked greedily by column-pivoted QR on Dbar_k, k = 0..H-1.
Regularity check_regular(const OperatorPsr& psr, std::int64_t column_cap = kDefaultColumnCap);

struct PsrCertificate {
  // rank_per_step[h - 1] = rank Dbar_h for h = 1..H.
  std::vector<int> rank_per_step;
  int rank = 0;
  std::optional<double> alpha_regular;
  double alpha_generalized = 0.0;
  double delta_bound = 0.0;
  std::string delta_witness;
};

// Ranks and a (K, V) factorization witness for the delta bound. With the
// source POMDP the witness is K = [P(t | s)], V = [P(s | tau)]; otherwise a
// rank-revealing factorization of Dbar.
PsrCertificate psr_rank_and_delta(const OperatorPsr& psr, const TabularPOMDP* source = nullptr,
                                  std::int64_t column_cap = kDefaultColumnCap);

// Ranks, delta witness and both regularity constants. alpha_regular is left
// empty when no core matrix can be extracted.
PsrCertificate certify_psr(const OperatorPsr& psr, const TabularPOMDP* source = nullptr,
                           std::int64_t column_cap = kDefaultColumnCap);

nlohmann::json certificate_to_json(const PsrCertificate& cert);

}  // namespace geclab
