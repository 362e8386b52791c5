#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "derain/csc.hpp"
#include "derain/engine.hpp"
#include "derain/frame.hpp"

namespace derain::testing {

inline Frame random_frame(std::mt19937_64& rng, int h, int w, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Frame f(h, w);
  for (double& v : f.values()) v = u(rng);
  return f;
}

inline SupportMask random_mask(std::mt19937_64& rng, int h, int w, double p = 0.5) {
  std::bernoulli_distribution b(p);
  SupportMask m(h, w);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, b(rng));
  return m;
}

/// Low-frequency test image with enough structure for gradient methods.
inline Frame smooth_image(int h, int w, double phase = 0.0) {
  Frame f(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      f(y, x) = 0.5 + 0.2 * std::sin(0.21 * x + phase) * std::cos(0.17 * y - 0.5 * phase) +
                0.15 * std::cos(0.11 * (x + y) + 0.3) + 0.1 * std::sin(0.07 * x - 0.13 * y);
  return f;
}

/// Direct circular convolution with a centred kernel, the nested-loop oracle.
inline Frame direct_convolve(const Frame& k, const Frame& m) {
  const int h = m.height(), w = m.width(), p = k.height(), c = p / 2;
  Frame out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
          const int sy = ((y - i + c) % h + h) % h;
          const int sx = ((x - j + c) % w + w) % w;
          acc += k(i, j) * m(sy, sx);
        }
      out(y, x) = acc;
    }
  return out;
}

inline double oracle_objective(const Frame& k, const Frame& m, const Frame& target, double kappa) {
  const Frame r = direct_convolve(k, m) - target;
  return 0.5 * sum_squares(r) + kappa * sum_abs(m);
}

// FISTA with adaptive restart on the single-filter lasso
//   min_m 1/2 || A m - target ||^2 + kappa || m ||_1,
// A assembled column by column from direct_convolve. Stops once the gradient
// mapping L (m - prox(m - grad / L)) has norm below 1e-10.
inline Frame prox_gradient_oracle(const Frame& k, const Frame& target, double kappa) {
  const Shape g = target.shape();
  const auto d = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Frame e(g);
    e[static_cast<std::size_t>(j)] = 1.0;
    const Frame col = direct_convolve(k, e);
    for (Eigen::Index i = 0; i < d; ++i) a(i, j) = col[static_cast<std::size_t>(i)];
  }
  const Eigen::MatrixXd gram = a.transpose() * a;
  const Eigen::VectorXd c = a.transpose() * Eigen::Map<const Eigen::VectorXd>(target.data(), d);
  const double lip = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().maxCoeff();
  const auto prox = [&](const Eigen::VectorXd& v) {
    const Eigen::VectorXd z = v - (gram * v - c) / lip;
    return Eigen::VectorXd(z.unaryExpr([&](double x) { return std::copysign(std::max(std::abs(x) - kappa / lip, 0.0), x); }));
  };
  const auto objective = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(gram * v) - c.dot(v) + kappa * v.lpNorm<1>(); };
  Eigen::VectorXd m = Eigen::VectorXd::Zero(d), y = m;
  double tk = 1.0, last = objective(m);
  for (long it = 0; it < 20000000; ++it) {
    if (lip * (m - prox(m)).norm() < 1e-10) break;
    const Eigen::VectorXd next = prox(y);
    const double obj = objective(next);
    if (obj > last && tk > 1.0) {  // restart
      tk = 1.0;
      y = m;
      continue;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    y = next + (next - m) * ((tk - 1.0) / tn);
    tk = tn;
    m = next;
    last = obj;
  }
  Frame out(g);
  for (Eigen::Index i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] = m(i);
  return out;
}

inline FilterBank random_bank(std::mt19937_64& rng, const std::vector<ScaleSpec>& scales) {
  std::vector<Frame> filters;
  for (const ScaleSpec& s : scales)
    for (int i = 0; i < s.filter_count; ++i) {
      Frame f = random_frame(rng, s.patch_size, s.patch_size, -1.0, 1.0);
      f *= 1.0 / frobenius_norm(f);
      filters.push_back(std::move(f));
    }
  return FilterBank(scales, std::move(filters));
}

inline FilterBank single_filter_bank(Frame kernel) {
  const int p = kernel.height();
  return FilterBank({{p, 1}}, {std::move(kernel)});
}

/// Weights tuned for unit-range synthetic scenes; same values as configs/synthetic.ini.
inline EngineConfig synthetic_config() {
  EngineConfig cfg;
  cfg.lambda = 100.0;
  cfg.alpha = 30.0;
  cfg.beta = 15.0;
  return cfg;
}

}  // namespace derain::testing
