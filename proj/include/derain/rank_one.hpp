#pragma once

// Leading singular pair of a tall d x n matrix by power iteration on the
// n x n Gram matrix.

#include <Eigen/Dense>

namespace derain {

struct RankOne {
  Eigen::VectorXd u;  // d-vector carrying the singular value
  Eigen::VectorXd v;  // unit n-vector, first nonzero entry positive
  int iterations = 0;

  Eigen::MatrixXd matrix() const { return u * v.transpose(); }
};

/// Best rank-one approximation u v'. A zero matrix gives zero factors.
RankOne rank_one_approx(const Eigen::MatrixXd& m, int max_iters = 100000, double tolerance = 1e-15);

}  // namespace derain
