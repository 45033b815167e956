#pragma once

#include <Eigen/Dense>

namespace geclab {

inline constexpr double kRankTolerance = 1e-9;

// Moore-Penrose inverse; singular values below rel_tol * sigma_max are dropped.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rel_tol = kRankTolerance);

// Number of singular values above rel_tol * sigma_max.
int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = kRankTolerance);

// Matrix 1-norm: largest absolute column sum.
double matrix_one_norm(const Eigen::MatrixXd& m);

// log det of a symmetric positive definite matrix.
double log_det_spd(const Eigen::MatrixXd& m);

}  // namespace geclab
