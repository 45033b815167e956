#include "geclab/divergences.hpp"

#include <cmath>
#include <limits>

#include "geclab/errors.hpp"

namespace geclab {
namespace {

constexpr double kSimplexTolerance = 1e-9;

void check_pair(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw ModelError("distributions have different supports");
  if (p.size() == 0) throw ModelError("empty distribution");
  if (p.minCoeff() < 0.0 || q.minCoeff() < 0.0 || std::abs(p.sum() - 1.0) > kSimplexTolerance ||
      std::abs(q.sum() - 1.0) > kSimplexTolerance) {
    throw ModelError("argument is not a probability vector");
  }
}

}  // namespace

double hellinger_squared(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  check_pair(p, q);
  double bc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) bc += std::sqrt(p[i] * q[i]);
  return std::max(0.0, 1.0 - bc);
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  check_pair(p, q);
  return 0.5 * (p - q).cwiseAbs().sum();
}

double kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  check_pair(p, q);
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] < 1e-300) return std::numeric_limits<double>::infinity();
    total += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, total);
}

double expected_conditional_hellinger(const Eigen::MatrixXd& p_joint,
                                      const Eigen::MatrixXd& q_joint) {
  if (p_joint.rows() != q_joint.rows() || p_joint.cols() != q_joint.cols()) {
    throw ModelError("joint tables have different shapes");
  }
  double total = 0.0;
  for (Eigen::Index x = 0; x < p_joint.rows(); ++x) {
    const double px = p_joint.row(x).sum();
    if (px <= 0.0) continue;
    const double qx = q_joint.row(x).sum();
    Eigen::VectorXd pc = p_joint.row(x).transpose() / px;
    Eigen::VectorXd qc;
    if (qx > 0.0) {
      qc = q_joint.row(x).transpose() / qx;
      double bc = 0.0;
      for (Eigen::Index y = 0; y < pc.size(); ++y) bc += std::sqrt(pc[y] * qc[y]);
      total += px * std::max(0.0, 1.0 - bc);
    } else {
      total += px;  // Q_{Y|x} is undefined; treat as disjoint support.
    }
  }
  return total;
}

}  // namespace geclab
