#pragma once

// Online filter learning on an accumulated quadratic surrogate.
//
// With all filter taps stacked into one vector d, the rain approximation is
// linear in d, so the data term of one frame is 1/2 d'A d - c'd + const where
// A collects map-map correlations and c map-target correlations. Frames are
// folded in with exponential forgetting and the filters are refreshed by
// block-coordinate descent, one filter block at a time, each block solved
// exactly on the unit Frobenius ball.

#include <Eigen/Dense>
#include <vector>

#include "derain/frame.hpp"

namespace derain {

struct DictionarySettings {
  double forgetting = 0.99;
  int sweeps = 3;

  bool operator==(const DictionarySettings&) const = default;
};

class DictionaryStats {
 public:
  DictionaryStats() = default;
  explicit DictionaryStats(const FilterBank& bank, double forgetting = 0.99);

  bool matches(const FilterBank& bank) const;

  /// Replaces the pending (current-frame) contribution with the statistics
  /// of these maps against this target.
  void accumulate(const FeatureMapSet& maps, const Frame& target);
  /// Folds the pending contribution into the decayed history.
  void commit();

  Eigen::MatrixXd surrogate_gram() const;
  Eigen::VectorXd surrogate_cross() const;
  /// 1/2 d'A d - c'd for the bank's current taps.
  double surrogate_value(const FilterBank& bank) const;

  double forgetting() const { return forgetting_; }
  long frames_committed() const { return frames_committed_; }
  bool has_pending() const { return pending_; }
  std::size_t tap_count() const { return static_cast<std::size_t>(past_gram_.rows()); }
  const std::vector<Eigen::Index>& offsets() const { return offsets_; }

  const Eigen::MatrixXd& past_gram() const { return past_gram_; }
  const Eigen::VectorXd& past_cross() const { return past_cross_; }
  const Eigen::MatrixXd& frame_gram() const { return frame_gram_; }
  const Eigen::VectorXd& frame_cross() const { return frame_cross_; }

  /// Rebuilds from serialized parts (snapshot loading).
  static DictionaryStats restore(const FilterBank& bank, double forgetting, long frames_committed, bool pending,
                                 Eigen::MatrixXd past_gram, Eigen::VectorXd past_cross, Eigen::MatrixXd frame_gram,
                                 Eigen::VectorXd frame_cross);

  bool operator==(const DictionaryStats& o) const;

 private:
  double forgetting_ = 0.99;
  long frames_committed_ = 0;
  bool pending_ = false;
  std::vector<int> patch_;
  std::vector<Eigen::Index> offsets_;
  Eigen::MatrixXd past_gram_;
  Eigen::VectorXd past_cross_;
  Eigen::MatrixXd frame_gram_;
  Eigen::VectorXd frame_cross_;
};

struct FilterUpdateReport {
  bool skipped = false;
  std::vector<double> surrogate_trace;  // value before the first sweep, then after each sweep
};

Eigen::VectorXd stack_taps(const FilterBank& bank);
FilterBank unstack_taps(const FilterBank& like, const Eigen::VectorXd& taps);

/// Minimizes 1/2 x'Qx - g'x over ||x|| <= 1 for a fixed symmetric PSD Q;
/// the eigendecomposition is reused across right-hand sides.
class BallQuadratic {
 public:
  explicit BallQuadratic(const Eigen::MatrixXd& q);
  Eigen::VectorXd solve(const Eigen::VectorXd& g) const;

 private:
  Eigen::MatrixXd basis_;
  Eigen::VectorXd eigenvalues_;
  double floor_ = 0.0;
};

Eigen::VectorXd solve_ball_quadratic(const Eigen::MatrixXd& q, const Eigen::VectorXd& g);

FilterBank update_filters(const FilterBank& bank, const FeatureMapSet& maps, const Frame& target,
                          DictionaryStats& stats, const DictionarySettings& settings = {},
                          FilterUpdateReport* report = nullptr);

}  // namespace derain
