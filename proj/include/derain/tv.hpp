#pragma once

// Masked total-variation restoration of the moving-object layer:
//
//   min_F  || H o (O - F) ||_F^2 + w * TV(F)
//
// with anisotropic TV. Outside the mask only the TV term acts, so those
// pixels are filled in by TV extension of the masked ones.

#include <string>
#include <vector>

#include "derain/frame.hpp"

namespace derain {

struct TvProblem {
  Frame observation;  // X - R
  SupportMask mask;   // H
  double weight = 0.0;
  double tolerance = 1e-4;  // relative primal change
  int max_iters = 100;
};

struct TvReport {
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  std::vector<double> objective_trace;  // best value so far, warm start first
  std::string warning;
};

/// Dual variable of the primal-dual scheme; pass it back in to warm-start
/// both halves of the iteration.
struct TvDual {
  Frame px;
  Frame py;
};

double tv_norm(const Frame& f);
double tv_objective(const TvProblem& p, const Frame& f);

/// Chambolle-Pock iteration from `warm`. Returns the best iterate seen, so
/// the result is never worse than the warm start.
Frame solve_tv(const TvProblem& p, const Frame& warm, TvReport* report = nullptr, TvDual* dual = nullptr);

}  // namespace derain
