#pragma once

#include <Eigen/Dense>

namespace geclab {

// Squared Hellinger distance 1 - sum_i sqrt(p_i q_i).
double hellinger_squared(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// Total variation 0.5 * ||p - q||_1.
double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// KL(p || q) in nats. Infinite when p puts mass where q has none; terms with
// q_i below 1e-300 count as zero-mass.
double kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// E_{x ~ P_X} D_H^2(P_{Y|x}, Q_{Y|x}) for joint tables indexed (x, y).
double expected_conditional_hellinger(const Eigen::MatrixXd& p_joint, const Eigen::MatrixXd& q_joint);

}  // namespace geclab
