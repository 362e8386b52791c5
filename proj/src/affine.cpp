#include "derain/affine.hpp"

#include <cmath>
#include <stdexcept>

#include "derain/kernels.hpp"

namespace derain {

AffineTransform AffineTransform::rotation(double radians) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  return AffineTransform({c, -s, s, c, 0.0, 0.0});
}

AffineTransform AffineTransform::after(const AffineTransform& inner) const {
  // sample point = s_inner(s_this(p))
  const Params& a = inner.p_;
  const Params& b = p_;
  return AffineTransform({a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
                          a[2] * b[1] + a[3] * b[3], a[0] * b[4] + a[1] * b[5] + a[4],
                          a[2] * b[4] + a[3] * b[5] + a[5]});
}

AffineTransform AffineTransform::inverse() const {
  const double det = determinant();
  if (det == 0.0) throw std::invalid_argument("AffineTransform::inverse: singular linear part");
  const double i00 = p_[3] / det, i01 = -p_[1] / det, i10 = -p_[2] / det, i11 = p_[0] / det;
  return AffineTransform({i00, i01, i10, i11, -(i00 * p_[4] + i01 * p_[5]), -(i10 * p_[4] + i11 * p_[5])});
}

AffineTransform AffineTransform::plus(const Eigen::Matrix<double, 6, 1>& delta) const {
  Params q = p_;
  for (std::size_t i = 0; i < 6; ++i) q[i] += delta(static_cast<Eigen::Index>(i));
  return AffineTransform(q);
}

void require_invertible(const AffineTransform& tau) {
  const double det = tau.determinant();
  if (!std::isfinite(det) || std::abs(det) < 0.1)
    throw std::invalid_argument("affine transform is degenerate (|det A| < 0.1)");
}

Frame warp(const Frame& img, const AffineTransform& tau) {
  require_invertible(tau);
  Frame out(img.shape());
  kernels::warp_bilinear(img.values(), img.height(), img.width(), tau.params(), out.values());
  return out;
}

WarpJacobian jacobian(const Frame& img, const AffineTransform& tau) {
  require_invertible(tau);
  const int h = img.height();
  const int w = img.width();
  Frame gx(img.shape()), gy(img.shape());
  kernels::central_gradient(img.values(), h, w, gx.values(), gy.values());
  const Frame wx = warp(gx, tau);
  const Frame wy = warp(gy, tau);

  WarpJacobian jac{img.shape(), {}};
  jac.rows.resize(static_cast<Eigen::Index>(img.size()), 6);
  const double cx = 0.5 * (w - 1);
  const double cy = 0.5 * (h - 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double yc = y - cy;
    for (int x = 0; x < w; ++x) {
      const double xc = x - cx;
      const auto i = static_cast<Eigen::Index>(y) * w + x;
      const double ex = wx[static_cast<std::size_t>(i)];
      const double ey = wy[static_cast<std::size_t>(i)];
      jac.rows(i, 0) = ex * xc;
      jac.rows(i, 1) = ex * yc;
      jac.rows(i, 2) = ey * xc;
      jac.rows(i, 3) = ey * yc;
      jac.rows(i, 4) = ex;
      jac.rows(i, 5) = ey;
    }
  }
  return jac;
}

double alignment_residual(const Frame& x, const Frame& rain, const Frame& background, const AffineTransform& tau,
                          const SupportMask& mask) {
  const Frame b = warp(background, tau);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (mask[i]) continue;
    const double r = x[i] - rain[i] - b[i];
    acc += r * r;
  }
  return acc;
}

StepResult delta_tau(const Frame& x, const Frame& rain, const Frame& background_prev, const AffineTransform& tau,
                     const SupportMask& mask) {
  const Shape g = x.shape();
  require_same_shape(g, rain.shape(), "delta_tau rain layer");
  require_same_shape(g, background_prev.shape(), "delta_tau background");
  require_same_shape(g, mask.shape(), "delta_tau mask");

  StepResult out;
  const WarpJacobian jac = jacobian(background_prev, tau);
  const Frame b = warp(background_prev, tau);

  Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (mask[i]) continue;
    const auto row = jac.rows.row(static_cast<Eigen::Index>(i));
    if (row(4) == 0.0 && row(5) == 0.0) continue;
    ++out.used_pixels;
    jtj.noalias() += row.transpose() * row;
    jtr.noalias() += row.transpose() * (x[i] - rain[i] - b[i]);
  }
  if (out.used_pixels < kMinAlignPixels) {
    out.warning = "delta_tau: only " + std::to_string(out.used_pixels) + " usable pixels, step skipped";
    return out;
  }
  const double trace = jtj.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) {
    out.warning = "delta_tau: normal equations are degenerate, step skipped";
    return out;
  }
  jtj.diagonal().array() += 1e-6 * trace / 6.0;
  const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(jtj);
  Eigen::Matrix<double, 6, 1> delta = ldlt.solve(jtr);
  if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
    out.warning = "delta_tau: normal equations could not be solved, step skipped";
    return out;
  }
  out.delta = delta;
  return out;
}

DampedStep damped_update(const Frame& x, const Frame& rain, const Frame& background, const AffineTransform& tau,
                         const SupportMask& mask, const Eigen::Matrix<double, 6, 1>& delta, double current_residual,
                         int max_halvings) {
  DampedStep out{tau, current_residual, 0, false};
  Eigen::Matrix<double, 6, 1> step = delta;
  for (int k = 0; k <= max_halvings; ++k, step *= 0.5) {
    const AffineTransform trial = tau.plus(step);
    const double det = trial.determinant();
    if (std::isfinite(det) && std::abs(det) >= 0.1) {
      const double r = alignment_residual(x, rain, background, trial, mask);
      if (r <= current_residual) {
        out = {trial, r, k, true};
        return out;
      }
    }
  }
  return out;
}

Frame downsample2(const Frame& f) {
  const int h = f.height() / 2;
  const int w = f.width() / 2;
  Frame out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out(y, x) = 0.25 * (f(2 * y, 2 * x) + f(2 * y, 2 * x + 1) + f(2 * y + 1, 2 * x) + f(2 * y + 1, 2 * x + 1));
  return out;
}

namespace {

// Coarse pixel i covers fine pixels 2i and 2i+1, i.e. x_fine = 2 x_coarse + 0.5.
AffineTransform refine(const AffineTransform& coarse, Shape coarse_grid, Shape fine_grid) {
  const auto& p = coarse.params();
  const double kx = 2.0 * 0.5 * (coarse_grid.width - 1) + 0.5 - 0.5 * (fine_grid.width - 1);
  const double ky = 2.0 * 0.5 * (coarse_grid.height - 1) + 0.5 - 0.5 * (fine_grid.height - 1);
  const double vx = 2.0 * p[4] + (1.0 - p[0]) * kx - p[1] * ky;
  const double vy = 2.0 * p[5] - p[2] * kx + (1.0 - p[3]) * ky;
  return AffineTransform({p[0], p[1], p[2], p[3], vx, vy});
}

struct LevelResult {
  AffineTransform tau;
  int iterations = 0;
  double residual = 0.0;
  bool diverged = false;
};

LevelResult gauss_newton(const Frame& frame, const Frame& reference, AffineTransform tau, const AlignSettings& s) {
  const Frame zero(frame.shape());
  const SupportMask empty(frame.shape());
  LevelResult out{tau, 0, alignment_residual(reference, zero, frame, tau, empty), false};
  int growth = 0;
  double previous = out.residual;
  for (int it = 1; it <= s.max_iters; ++it) {
    out.iterations = it;
    const StepResult step = delta_tau(reference, zero, frame, out.tau, empty);
    if (!step.warning.empty()) break;
    const DampedStep d = damped_update(reference, zero, frame, out.tau, empty, step.delta, out.residual, s.max_halvings);
    if (!d.accepted) break;
    out.tau = d.tau;
    growth = d.residual > previous ? growth + 1 : 0;
    previous = d.residual;
    out.residual = d.residual;
    if (growth >= 3) {
      out.diverged = true;
      break;
    }
    if (step.delta.norm() * std::pow(0.5, d.halvings) < s.step_tolerance) break;
  }
  return out;
}

}  // namespace

Alignment align_to_reference(const Frame& frame, const Frame& reference, const AlignSettings& settings) {
  require_same_shape(frame.shape(), reference.shape(), "align_to_reference");
  std::vector<Frame> frames{frame};
  std::vector<Frame> refs{reference};
  while (static_cast<int>(frames.size()) < settings.pyramid_levels && frames.back().height() / 2 >= kMinFrameSide &&
         frames.back().width() / 2 >= kMinFrameSide) {
    frames.push_back(downsample2(frames.back()));
    refs.push_back(downsample2(refs.back()));
  }

  Alignment out;
  AffineTransform tau;
  for (std::size_t level = frames.size(); level-- > 0;) {
    if (level + 1 < frames.size()) tau = refine(tau, frames[level + 1].shape(), frames[level].shape());
    const LevelResult r = gauss_newton(frames[level], refs[level], tau, settings);
    out.iterations += r.iterations;
    tau = r.tau;
    if (r.diverged) {
      out.warning = "align_to_reference: residual grew for 3 consecutive iterations";
      tau = AffineTransform::identity();
      break;
    }
  }

  const Frame zero(frame.shape());
  const SupportMask empty(frame.shape());
  const double start = alignment_residual(reference, zero, frame, AffineTransform::identity(), empty);
  double final_residual = alignment_residual(reference, zero, frame, tau, empty);
  if (final_residual > start) {
    if (out.warning.empty()) out.warning = "align_to_reference: alignment ended worse than identity";
    tau = AffineTransform::identity();
    final_residual = start;
  }
  out.tau = tau;
  out.residual = final_residual;
  out.warped = warp(frame, tau);
  return out;
}

}  // namespace derain
