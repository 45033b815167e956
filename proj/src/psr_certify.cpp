#include "geclab/psr_certify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "geclab/errors.hpp"
#include "geclab/linalg.hpp"

namespace geclab {
namespace {

// Histories with probability at or below this are treated as unreachable.
constexpr double kReachableMass = 1e-12;
constexpr double kWitnessTolerance = 1e-8;

// max over history policies of sum_tau |m(tau) v| for trajectories from step k.
double worst_policy_mass(const OperatorPsr& psr, int k, const Eigen::VectorXd& v) {
  if (k == psr.horizon()) return std::abs(v[0]);
  double total = 0.0;
  for (int o = 0; o < psr.num_observations(); ++o) {
    double best = 0.0;
    for (int a = 0; a < psr.num_actions(); ++a) {
      best = std::max(best, worst_policy_mass(psr, k + 1, psr.op(k, o, a) * v));
    }
    total += best;
  }
  return total;
}

std::int64_t history_count(const OperatorPsr& psr, int step, std::int64_t cap) {
  std::int64_t count = 1;
  const std::int64_t radix = static_cast<std::int64_t>(psr.num_observations()) * psr.num_actions();
  for (int j = 0; j < step; ++j) {
    count *= radix;
    if (count > cap) {
      std::ostringstream msg;
      msg << "history enumeration at step " << step << " exceeds the column cap " << cap;
      throw CapacityError(msg.str());
    }
  }
  return count;
}

// Visit every history tau_k in mixed-radix order with its filter.
template <class Model, class Fn>
void for_each_history(const Model& model, int step, Fn&& fn) {
  std::int64_t column = 0;
  std::function<void(int, const Eigen::VectorXd&)> rec = [&](int j, const Eigen::VectorXd& f) {
    if (j == step) {
      fn(column++, f);
      return;
    }
    for (int o = 0; o < model.num_observations(); ++o) {
      for (int a = 0; a < model.num_actions(); ++a) rec(j + 1, model.advance(j, f, o, a));
    }
  };
  rec(0, model.initial_filter());
}

std::vector<int> pivot_columns(const Eigen::MatrixXd& d, int rank) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d);
  std::vector<int> cols;
  const auto& perm = qr.colsPermutation().indices();
  for (int i = 0; i < rank; ++i) cols.push_back(perm[i]);
  return cols;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& d, const std::vector<int>& cols) {
  Eigen::MatrixXd k(d.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) k.col(static_cast<Eigen::Index>(i)) = d.col(cols[i]);
  return k;
}

}  // namespace

GeneralizedRegularity check_generalized_regular(const OperatorPsr& psr) {
  GeneralizedRegularity out;
  const int horizon = psr.horizon();
  double alpha = std::numeric_limits<double>::infinity();
  for (int k = 0; k < horizon; ++k) {
    const int n = psr.core().size(k);
    double c1 = 0.0;
    for (int i = 0; i < n; ++i) {
      c1 = std::max(c1, worst_policy_mass(psr, k, Eigen::VectorXd::Unit(n, i)));
    }
    out.condition1.push_back(c1);
    if (c1 > 0.0 && 1.0 / c1 < alpha) {
      alpha = 1.0 / c1;
      out.binding_step = k;
      out.binding_condition = 1;
    }
  }
  for (int k = 0; k + 1 < horizon; ++k) {
    const int n = psr.core().size(k);
    double c2 = 0.0;
    for (int i = 0; i < n; ++i) {
      double total = 0.0;
      for (int o = 0; o < psr.num_observations(); ++o) {
        double best = 0.0;
        for (int a = 0; a < psr.num_actions(); ++a) {
          best = std::max(best, psr.op(k, o, a).col(i).cwiseAbs().sum());
        }
        total += best;
      }
      c2 = std::max(c2, total);
    }
    out.condition2.push_back(c2);
    const double sequences = static_cast<double>(psr.core().action_sequences(k + 1).size());
    if (c2 > 0.0 && sequences / c2 < alpha) {
      alpha = sequences / c2;
      out.binding_step = k;
      out.binding_condition = 2;
    }
  }
  out.alpha = alpha;
  return out;
}

Eigen::MatrixXd system_dynamics_matrix(const OperatorPsr& psr, int step, std::int64_t column_cap) {
  if (step < 0 || step > psr.horizon()) throw ModelError("step out of range");
  const std::int64_t cols = history_count(psr, step, column_cap);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(psr.core().size(step), cols);
  for_each_history(psr, step, [&](std::int64_t c, const Eigen::VectorXd& q) {
    const double mass = psr.prefix_mass(step, q);
    if (mass > kReachableMass) d.col(c) = q / mass;
  });
  return d;
}

double regular_alpha_from_core(const Eigen::MatrixXd& core_matrix) {
  const double norm = matrix_one_norm(pseudo_inverse(core_matrix));
  if (norm <= 0.0) throw ModelError("core matrix is zero");
  return 1.0 / norm;
}

Regularity check_regular(const OperatorPsr& psr, std::int64_t column_cap) {
  Regularity out;
  out.alpha = std::numeric_limits<double>::infinity();
  for (int k = 0; k < psr.horizon(); ++k) {
    const Eigen::MatrixXd d = system_dynamics_matrix(psr, k, column_cap);
    const int rank = numerical_rank(d);
    if (rank == 0) {
      throw ModelError("no core matrix can be extracted at step " + std::to_string(k));
    }
    const auto cols = pivot_columns(d, rank);
    const Eigen::MatrixXd core = select_columns(d, cols);
    const double norm = matrix_one_norm(pseudo_inverse(core));
    out.inverse_norms.push_back(norm);
    out.core_histories.push_back(cols);
    out.alpha = std::min(out.alpha, 1.0 / norm);
  }
  return out;
}

PsrCertificate psr_rank_and_delta(const OperatorPsr& psr, const TabularPOMDP* source,
                                  std::int64_t column_cap) {
  PsrCertificate cert;
  const int horizon = psr.horizon();
  if (source != nullptr) {
    if (source->horizon() != horizon || source->num_observations() != psr.num_observations() ||
        source->num_actions() != psr.num_actions()) {
      throw ModelError("source POMDP does not match the PSR dimensions");
    }
  }
  cert.delta_witness = source != nullptr ? "latent" : "rank-revealing";
  for (int h = 1; h <= horizon; ++h) {
    const Eigen::MatrixXd d = system_dynamics_matrix(psr, h, column_cap);
    const int rank = numerical_rank(d);
    cert.rank_per_step.push_back(rank);
    cert.rank = std::max(cert.rank, rank);
    double bound = 0.0;
    if (source != nullptr) {
      const Eigen::MatrixXd k = test_emission_matrix(*source, psr.core(), h);
      Eigen::MatrixXd v = Eigen::MatrixXd::Zero(source->num_states(), d.cols());
      for_each_history(*source, h, [&](std::int64_t c, const Eigen::VectorXd& f) {
        const double mass = f.sum();
        if (mass > kReachableMass) v.col(c) = f / mass;
      });
      const double err = d.cols() > 0 ? (k * v - d).cwiseAbs().maxCoeff() : 0.0;
      if (err > kWitnessTolerance) {
        std::ostringstream msg;
        msg << "latent factorization misses Dbar at step " << h << " by " << err;
        throw ModelError(msg.str());
      }
      bound = matrix_one_norm(k) * matrix_one_norm(v);
    } else if (rank > 0) {
      const Eigen::MatrixXd k = select_columns(d, pivot_columns(d, rank));
      const Eigen::MatrixXd v = pseudo_inverse(k) * d;
      bound = matrix_one_norm(k) * matrix_one_norm(v);
    }
    cert.delta_bound = std::max(cert.delta_bound, bound);
  }
  return cert;
}

PsrCertificate certify_psr(const OperatorPsr& psr, const TabularPOMDP* source,
                           std::int64_t column_cap) {
  PsrCertificate cert = psr_rank_and_delta(psr, source, column_cap);
  cert.alpha_generalized = check_generalized_regular(psr).alpha;
  try {
    cert.alpha_regular = check_regular(psr, column_cap).alpha;
  } catch (const ModelError&) {
    cert.alpha_regular.reset();
  }
  return cert;
}

nlohmann::json certificate_to_json(const PsrCertificate& cert) {
  nlohmann::json j;
  j["rank_per_step"] = cert.rank_per_step;
  j["rank"] = cert.rank;
  if (cert.alpha_regular) {
    j["alpha_regular"] = *cert.alpha_regular;
  } else {
    j["alpha_regular"] = nullptr;
  }
  j["alpha_generalized"] = cert.alpha_generalized;
  j["delta_bound"] = cert.delta_bound;
  j["delta_witness"] = cert.delta_witness;
  return j;
}

}  // namespace geclab
