#pragma once

// Convolutional sparse coding of a single target frame:
//
//   min_M  1/2 || sum_ks D_ks (*) M_ks - target ||_F^2 + sum_ks kappa_ks || M_ks ||_1
//
// with kappa_ks = b_ks / rho, solved by ADMM in the Fourier domain. The
// per-frequency linear system is rank one plus a multiple of the identity
// and is inverted with the Sherman-Morrison formula.

#include <string>
#include <vector>

#include "derain/fft_conv.hpp"
#include "derain/frame.hpp"

namespace derain {

Frame soft_threshold(const Frame& x, double kappa);

struct CscSettings {
  int max_iters = 50;
  double tolerance = 1e-4;      // relative primal and dual residual
  double penalty_factor = 10.0; // initial penalty = factor * mean(b) / rho
  double balance_ratio = 10.0;  // residual-balancing trigger
  double balance_step = 2.0;    // penalty multiplier when rebalancing
  double relaxation = 1.8;      // over-relaxation of the x update, 1 disables
  bool track_objective = false;

  bool operator==(const CscSettings&) const = default;
};

struct CscReport {
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;  // relative
  double dual_residual = 0.0;    // relative
  double penalty = 0.0;
  double objective = 0.0;
  std::vector<double> objective_trace;
  std::string warning;
};

/// Carries the ADMM split variables between calls so every frame (and every
/// outer iteration) starts from the previous solution.
struct CscWorkspace {
  Shape grid;
  FeatureMapSet maps;   // sparse split variable, returned to callers
  FeatureMapSet dual;   // unscaled multiplier (penalty * scaled dual)
  double penalty = 0.0;
  CscReport report;

  void reset(std::size_t filter_count, Shape g);
  bool matches(std::size_t filter_count, Shape g) const;
};

/// kappa_ks = b_ks / rho for every filter.
std::vector<double> l1_weights(const ScaleParams& scales, double rho);

double csc_objective(const FilterBank& bank, const FeatureMapSet& maps, const Frame& target,
                     const std::vector<double>& weights);

/// Solves with kappa = b / rho.
FeatureMapSet update_feature_maps(const FilterBank& bank, const Frame& target, const ScaleParams& scales, double rho,
                                  CscWorkspace& ws, const CscSettings& settings = {});

/// Same solver with explicit per-filter weights; the initial ADMM penalty is
/// penalty_factor * mean(weights).
FeatureMapSet update_feature_maps_weighted(const FilterBank& bank, const Frame& target,
                                           const std::vector<double>& weights, CscWorkspace& ws,
                                           const CscSettings& settings = {});

}  // namespace derain
