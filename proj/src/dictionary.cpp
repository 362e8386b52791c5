#include "derain/dictionary.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "derain/fft_conv.hpp"

namespace derain {

DictionaryStats::DictionaryStats(const FilterBank& bank, double forgetting) : forgetting_(forgetting) {
  if (!(forgetting > 0.0 && forgetting <= 1.0)) throw std::invalid_argument("DictionaryStats: forgetting in (0,1]");
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < bank.filter_count(); ++i) {
    const int p = bank.filter(i).height();
    patch_.push_back(p);
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(p) * p;
  }
  past_gram_ = Eigen::MatrixXd::Zero(total, total);
  frame_gram_ = Eigen::MatrixXd::Zero(total, total);
  past_cross_ = Eigen::VectorXd::Zero(total);
  frame_cross_ = Eigen::VectorXd::Zero(total);
}

bool DictionaryStats::matches(const FilterBank& bank) const {
  if (patch_.size() != bank.filter_count()) return false;
  for (std::size_t i = 0; i < patch_.size(); ++i)
    if (patch_[i] != bank.filter(i).height()) return false;
  return true;
}

namespace {

// Periodic lookup of a correlation surface at a signed lag.
inline double at_lag(const Frame& c, int dy, int dx) {
  const int h = c.height();
  const int w = c.width();
  return c(((dy % h) + h) % h, ((dx % w) + w) % w);
}

}  // namespace

void DictionaryStats::accumulate(const FeatureMapSet& maps, const Frame& target) {
  if (maps.size() != patch_.size()) throw DimensionError("DictionaryStats: one map per filter required");
  for (const auto& m : maps) require_same_shape(m.shape(), target.shape(), "DictionaryStats map");
  const std::size_t nf = maps.size();

  std::vector<Spectrum> mhat;
  mhat.reserve(nf);
  for (const auto& m : maps) mhat.push_back(forward_fft(m));
  const Spectrum that = forward_fft(target);

  frame_gram_.setZero();
  frame_cross_.setZero();

  for (std::size_t m = 0; m < nf; ++m) {
    const int pm = patch_[m];
    const int cm = pm / 2;
    for (std::size_t n = m; n < nf; ++n) {
      const int pn = patch_[n];
      const int cn = pn / 2;
      Spectrum prod{mhat[m].grid, mhat[m].bins};
      for (std::size_t b = 0; b < prod.bins.size(); ++b) prod.bins[b] = std::conj(mhat[m].bins[b]) * mhat[n].bins[b];
      const Frame corr = inverse_fft(prod);
      // A[(m,a),(n,b)] = C_mn(o_a - o_b)
      for (int ai = 0; ai < pm; ++ai) {
        for (int aj = 0; aj < pm; ++aj) {
          const Eigen::Index row = offsets_[m] + ai * pm + aj;
          for (int bi = 0; bi < pn; ++bi) {
            for (int bj = 0; bj < pn; ++bj) {
              const Eigen::Index col = offsets_[n] + bi * pn + bj;
              const double v = at_lag(corr, (ai - cm) - (bi - cn), (aj - cm) - (bj - cn));
              frame_gram_(row, col) = v;
              frame_gram_(col, row) = v;
            }
          }
        }
      }
    }
    Spectrum prod{mhat[m].grid, mhat[m].bins};
    for (std::size_t b = 0; b < prod.bins.size(); ++b) prod.bins[b] = std::conj(mhat[m].bins[b]) * that.bins[b];
    const Frame corr = inverse_fft(prod);
    for (int ai = 0; ai < pm; ++ai)
      for (int aj = 0; aj < pm; ++aj) frame_cross_(offsets_[m] + ai * pm + aj) = at_lag(corr, ai - cm, aj - cm);
  }
  pending_ = true;
}

void DictionaryStats::commit() {
  if (!pending_) return;
  past_gram_ = forgetting_ * past_gram_ + frame_gram_;
  past_cross_ = forgetting_ * past_cross_ + frame_cross_;
  frame_gram_.setZero();
  frame_cross_.setZero();
  pending_ = false;
  ++frames_committed_;
}

Eigen::MatrixXd DictionaryStats::surrogate_gram() const { return forgetting_ * past_gram_ + frame_gram_; }
Eigen::VectorXd DictionaryStats::surrogate_cross() const { return forgetting_ * past_cross_ + frame_cross_; }

double DictionaryStats::surrogate_value(const FilterBank& bank) const {
  const Eigen::VectorXd d = stack_taps(bank);
  return 0.5 * d.dot(surrogate_gram() * d) - surrogate_cross().dot(d);
}

DictionaryStats DictionaryStats::restore(const FilterBank& bank, double forgetting, long frames_committed,
                                         bool pending, Eigen::MatrixXd past_gram, Eigen::VectorXd past_cross,
                                         Eigen::MatrixXd frame_gram, Eigen::VectorXd frame_cross) {
  DictionaryStats s(bank, forgetting);
  const Eigen::Index n = s.past_gram_.rows();
  if (past_gram.rows() != n || past_gram.cols() != n || frame_gram.rows() != n || frame_gram.cols() != n ||
      past_cross.size() != n || frame_cross.size() != n)
    throw DimensionError("DictionaryStats::restore: statistics do not match the filter bank");
  s.frames_committed_ = frames_committed;
  s.pending_ = pending;
  s.past_gram_ = std::move(past_gram);
  s.past_cross_ = std::move(past_cross);
  s.frame_gram_ = std::move(frame_gram);
  s.frame_cross_ = std::move(frame_cross);
  return s;
}

bool DictionaryStats::operator==(const DictionaryStats& o) const {
  return forgetting_ == o.forgetting_ && frames_committed_ == o.frames_committed_ && pending_ == o.pending_ &&
         patch_ == o.patch_ && past_gram_ == o.past_gram_ && past_cross_ == o.past_cross_ &&
         frame_gram_ == o.frame_gram_ && frame_cross_ == o.frame_cross_;
}

Eigen::VectorXd stack_taps(const FilterBank& bank) {
  Eigen::Index total = 0;
  for (const auto& f : bank.filters()) total += static_cast<Eigen::Index>(f.size());
  Eigen::VectorXd d(total);
  Eigen::Index k = 0;
  for (const auto& f : bank.filters())
    for (double v : f.values()) d(k++) = v;
  return d;
}

FilterBank unstack_taps(const FilterBank& like, const Eigen::VectorXd& taps) {
  std::vector<Frame> filters;
  Eigen::Index k = 0;
  for (const auto& f : like.filters()) {
    Frame g(f.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = taps(k++);
    filters.push_back(std::move(g));
  }
  if (k != taps.size()) throw DimensionError("unstack_taps: tap count does not match the bank");
  return FilterBank(like.scales(), std::move(filters));
}

BallQuadratic::BallQuadratic(const Eigen::MatrixXd& q) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q);
  if (eig.info() != Eigen::Success) throw std::runtime_error("BallQuadratic: eigendecomposition failed");
  basis_ = eig.eigenvectors();
  eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
  floor_ = 1e-14 * std::max(1.0, eigenvalues_.maxCoeff());
}

Eigen::VectorXd BallQuadratic::solve(const Eigen::VectorXd& g) const {
  const Eigen::VectorXd c = basis_.transpose() * g;
  auto norm_at = [&](double mu) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double den = eigenvalues_(i) + mu;
      if (den <= floor_) {
        if (std::abs(c(i)) > 0.0) return std::numeric_limits<double>::infinity();
        continue;
      }
      acc += (c(i) / den) * (c(i) / den);
    }
    return std::sqrt(acc);
  };

  double mu = 0.0;
  if (norm_at(0.0) > 1.0) {
    // ||x(mu)|| decreases in mu and ||x(||g||)|| <= 1
    double lo = 0.0;
    double hi = std::max(c.norm(), floor_);
    for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (norm_at(mid) > 1.0 ? lo : hi) = mid;
    }
    mu = hi;
  }
  Eigen::VectorXd z(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double den = eigenvalues_(i) + mu;
    z(i) = den <= floor_ ? 0.0 : c(i) / den;
  }
  Eigen::VectorXd x = basis_ * z;
  const double n = x.norm();
  if (n > 1.0) x /= n;
  return x;
}

Eigen::VectorXd solve_ball_quadratic(const Eigen::MatrixXd& q, const Eigen::VectorXd& g) {
  return BallQuadratic(q).solve(g);
}

FilterBank update_filters(const FilterBank& bank, const FeatureMapSet& maps, const Frame& target,
                          DictionaryStats& stats, const DictionarySettings& settings, FilterUpdateReport* report) {
  if (!stats.matches(bank)) throw DimensionError("update_filters: statistics were built for a different bank");
  stats.accumulate(maps, target);

  FilterUpdateReport local;
  FilterUpdateReport& rep = report ? *report : local;
  rep = {};

  const bool all_zero = std::all_of(maps.begin(), maps.end(), [](const Frame& m) { return sum_abs(m) == 0.0; });
  if (all_zero) {
    rep.skipped = true;
    return bank;
  }

  const Eigen::MatrixXd a = stats.surrogate_gram();
  const Eigen::VectorXd c = stats.surrogate_cross();
  Eigen::VectorXd d = stack_taps(bank);
  const auto& off = stats.offsets();
  const std::size_t nf = bank.filter_count();

  auto value = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(a * v) - c.dot(v); };
  rep.surrogate_trace.push_back(value(d));

  // a small proximal pull keeps directions the data does not see at their old value
  std::vector<BallQuadratic> blocks;
  std::vector<double> prox(nf);
  blocks.reserve(nf);
  for (std::size_t m = 0; m < nf; ++m) {
    const Eigen::Index len = static_cast<Eigen::Index>(bank.filter(m).size());
    Eigen::MatrixXd q = a.block(off[m], off[m], len, len);
    prox[m] = 1e-9 * std::max(q.diagonal().maxCoeff(), 1e-12);
    q.diagonal().array() += prox[m];
    blocks.emplace_back(q);
  }

  for (int sweep = 0; sweep < settings.sweeps; ++sweep) {
    for (std::size_t m = 0; m < nf; ++m) {
      const Eigen::Index o = off[m];
      const Eigen::Index len = static_cast<Eigen::Index>(bank.filter(m).size());
      // linear term with every other block held fixed
      Eigen::VectorXd g = c.segment(o, len) - a.middleRows(o, len) * d + a.block(o, o, len, len) * d.segment(o, len);
      g += prox[m] * d.segment(o, len);
      d.segment(o, len) = blocks[m].solve(g);
    }
    rep.surrogate_trace.push_back(value(d));
  }
  return unstack_taps(bank, d);
}

}  // namespace derain
