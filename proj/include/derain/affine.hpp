#pragma once

// Affine background alignment. A transform maps output pixel p to the
// source location
//
//   s(p) = c + A (p - c) + v,      c = ((w - 1) / 2, (h - 1) / 2)
//
// so the identity has A = I, v = 0 and a pure rotation or scaling pivots
// about the frame centre. Parameters are stored as (a11, a12, a21, a22, vx, vy)
// and increments are added to them directly.

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "derain/frame.hpp"

namespace derain {

class AffineTransform {
 public:
  using Params = std::array<double, 6>;

  AffineTransform() = default;
  explicit AffineTransform(const Params& p) : p_(p) {}
  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double vx, double vy) { return AffineTransform({1.0, 0.0, 0.0, 1.0, vx, vy}); }
  /// Counter-clockwise rotation of the sampling grid by `radians` about the centre.
  static AffineTransform rotation(double radians);

  const Params& params() const { return p_; }
  double operator[](std::size_t i) const { return p_[i]; }
  double determinant() const { return p_[0] * p_[3] - p_[1] * p_[2]; }
  bool is_identity() const { return *this == identity(); }

  /// Warp by the result equals warping by `inner` and then by `*this`.
  AffineTransform after(const AffineTransform& inner) const;
  AffineTransform inverse() const;
  AffineTransform plus(const Eigen::Matrix<double, 6, 1>& delta) const;

  bool operator==(const AffineTransform&) const = default;

 private:
  Params p_{1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
};

/// Throws unless |det A| >= 0.1.
void require_invertible(const AffineTransform& tau);

/// Bilinear resampling at s(p); samples outside the grid take the nearest
/// boundary value. The identity reproduces the input exactly.
Frame warp(const Frame& img, const AffineTransform& tau);

/// d x 6 derivative of warp(img, tau) with respect to the parameters, from
/// central-difference gradients of img sampled at s(p).
struct WarpJacobian {
  Shape grid;
  Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor> rows;
};

WarpJacobian jacobian(const Frame& img, const AffineTransform& tau);

struct StepResult {
  Eigen::Matrix<double, 6, 1> delta = Eigen::Matrix<double, 6, 1>::Zero();
  std::size_t used_pixels = 0;
  std::string warning;
};

/// Pixels needed (mask = 0, nonzero gradient) before a step is attempted.
inline constexpr std::size_t kMinAlignPixels = 60;

/// Gauss-Newton increment over background pixels (mask = 0) for the
/// linearized residual X - R - warp(B_prev, tau) - J delta, using
/// (J'J + eps I) with eps = 1e-6 trace(J'J) / 6.
StepResult delta_tau(const Frame& x, const Frame& rain, const Frame& background_prev, const AffineTransform& tau,
                     const SupportMask& mask);

/// || mask^perp o (X - R - warp(B, tau)) ||^2
double alignment_residual(const Frame& x, const Frame& rain, const Frame& background, const AffineTransform& tau,
                          const SupportMask& mask);

struct DampedStep {
  AffineTransform tau;
  double residual = 0.0;
  int halvings = 0;
  bool accepted = false;
};

/// Applies delta, halving it up to `max_halvings` times until the residual
/// does not grow; keeps the old transform if every trial fails.
DampedStep damped_update(const Frame& x, const Frame& rain, const Frame& background, const AffineTransform& tau,
                         const SupportMask& mask, const Eigen::Matrix<double, 6, 1>& delta, double current_residual,
                         int max_halvings = 4);

struct AlignSettings {
  int max_iters = 30;
  double step_tolerance = 1e-6;
  int pyramid_levels = 3;
  int max_halvings = 4;

  bool operator==(const AlignSettings&) const = default;
};

struct Alignment {
  AffineTransform tau;
  Frame warped;
  int iterations = 0;
  double residual = 0.0;
  std::string warning;
};

/// Finds tau with warp(frame, tau) ~ reference, coarse to fine.
Alignment align_to_reference(const Frame& frame, const Frame& reference, const AlignSettings& settings = {});

/// 2x2 box average, dropping a trailing odd row or column.
Frame downsample2(const Frame& f);

}  // namespace derain
