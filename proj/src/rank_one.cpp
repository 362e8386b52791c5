#include "derain/rank_one.hpp"

#include <cmath>
#include <stdexcept>

namespace derain {

RankOne rank_one_approx(const Eigen::MatrixXd& m, int max_iters, double tolerance) {
  if (!m.allFinite()) throw std::invalid_argument("rank_one_approx: matrix must be finite");
  const Eigen::Index n = m.cols();
  RankOne out{Eigen::VectorXd::Zero(m.rows()), Eigen::VectorXd::Zero(n), 0};
  if (n == 0 || m.rows() == 0) return out;
  const Eigen::MatrixXd gram = m.transpose() * m;
  if (gram.trace() == 0.0) return out;

  // start from the heaviest column so the iterate is never orthogonal to it by accident
  Eigen::Index heaviest = 0;
  gram.diagonal().maxCoeff(&heaviest);
  Eigen::VectorXd v = gram.col(heaviest);
  v.normalize();
  for (int it = 1; it <= max_iters; ++it) {
    Eigen::VectorXd next = gram * v;
    const double norm = next.norm();
    if (norm == 0.0) break;
    next /= norm;
    const double change = (next - v).norm();
    v = std::move(next);
    out.iterations = it;
    if (change <= tolerance) break;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (v(i) != 0.0) {
      if (v(i) < 0.0) v = -v;
      break;
    }
  }
  out.v = v;
  out.u = m * v;
  return out;
}

}  // namespace derain
