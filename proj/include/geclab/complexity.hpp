#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

#include "geclab/hypotheses.hpp"
#include "geclab/models.hpp"

namespace geclab {

// log det(I + (1/eps) sum_i x_i x_i^T).
double information_gain(const std::vector<Eigen::VectorXd>& xs, double eps);

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double margin = 0.0;  // rhs - lhs
};

// sum_t min(1, ||x_t||^2 in the inverse of Lambda_t) against
// 2 log(det Lambda_{T+1} / det Lambda_1), with Lambda_t = Lambda_0 + sum_{i<t} x_i x_i^T.
InequalityCheck elliptical_potential_check(const std::vector<Eigen::VectorXd>& xs,
                                           const Eigen::MatrixXd& lambda0, double tol = 1e-9);

// One instance of the l2 eluder inequality. w[t][j] and x[t][i] are vectors
// in R^dim, p[t] is a distribution over the x[t][i].
struct EluderInstance {
  int dim = 0;
  std::vector<std::vector<Eigen::VectorXd>> w;
  std::vector<std::vector<Eigen::VectorXd>> x;
  std::vector<Eigen::VectorXd> p;
  Eigen::VectorXd gamma;
  double r = 1.0;
  double r_x = 1.0;
  double r_w = 1.0;
};

// sum_{s<t} sum_{i ~ p_s} (sum_j |w_{t,j}^T x_{s,i}|)^2.
double eluder_history_sum(const EluderInstance& inst, int t);

// Validates the three constraints (ConfigError when violated beyond tol) and
// compares sum_t min(R, E_{i~p_t} sum_j |w_{t,j}^T x_{t,i}|) with
// sqrt(2 d (R^2 T + sum_t gamma_t) log(1 + T R_x^2 R_w^2 / R^2)).
InequalityCheck l2_eluder_check(const EluderInstance& inst, double tol = 1e-9);

// Per-round prediction errors and per-(round, step) training errors.
struct GecTrace {
  std::vector<double> prediction;
  std::vector<std::vector<double>> training;
  std::string discrepancy_kind;
  double mc_tolerance = 0.0;
};

enum class BurnInForm {
  kGeneric,  // 2 sqrt(d H T) + eps H T
  kPsr,      // sqrt(d H T)
};

std::string to_string(BurnInForm form);

double gec_burn_in(BurnInForm form, double d, int steps, int rounds, double eps);

// True when every prefix T' satisfies
// sum_{t<=T'} prediction_t <= sqrt(d sum_{t<=T', h} training) + burn_in(d, T') + tol.
bool gec_inequality_holds(const GecTrace& trace, double d, BurnInForm form, double eps,
                          double tol = 1e-12);

struct GecCertificate {
  double d_hat = 0.0;
  std::string burn_in_used;
  std::string discrepancy_kind;
  double mc_tolerance = 0.0;
};

// Smallest d (to bisection tolerance) making the inequality hold on every prefix.
GecCertificate gec_certificate(const GecTrace& trace, BurnInForm form, double eps);

nlohmann::json gec_certificate_to_json(const GecCertificate& cert);
nlohmann::json gec_trace_to_json(const GecTrace& trace);
GecTrace gec_trace_from_json(const nlohmann::json& j);

// Bounds on the complexity for the structural classes.
double be_gec_bound(double d_q, int horizon, int rounds);
double witness_gec_bound(double d_q, int horizon, int rounds, double eps, double kappa);
double psr_gec_bound(double d_psr, int actions, int u_a, int horizon, int rounds, double alpha, double delta);

// Length of the longest eps-independent sequence of measures, allowing any
// common threshold eps' >= eps. expectations(g, j) = E_{mu_j}[g]. Duplicate
// measures are merged; more than `cap` distinct measures raises CapacityError.
int de_dimension(const Eigen::MatrixXd& expectations, double eps, int cap = 10);

enum class ResidualType { kQ, kV };

// DE dimension of the Bellman residual class against roll-in measures of the
// members' greedy policies, maximized over steps.
int be_dimension(const TabularMDP& env, const std::vector<ValueHypothesis>& cls, double eps,
                 ResidualType type, int cap = 10);

}  // namespace geclab
