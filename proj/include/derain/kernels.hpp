#pragma once

// Data-parallel per-pixel kernels. Every kernel in `derain::kernels` is an
// OpenMP loop; `derain::kernels::serial` holds the plain single-threaded
// reference used by the tests and the benchmark.
//
// Reductions in the parallel namespace sum fixed-size blocks and then add
// the block partials in order, so their result does not depend on the
// thread count.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace derain::kernels {

using Real = double;
using Labels = std::span<const std::uint8_t>;

/// Six affine parameters (a11, a12, a21, a22, vx, vy) acting on
/// center-relative pixel coordinates; see AffineTransform.
using AffineParams = std::array<double, 6>;

inline constexpr std::size_t kReductionBlock = 4096;

// out = (1 - H) * B + H * F + R
void compose(Labels h, std::span<const Real> b, std::span<const Real> f, std::span<const Real> r,
             std::span<Real> out);
// out = a * x + b * y
void axpby(Real a, std::span<const Real> x, Real b, std::span<const Real> y, std::span<Real> out);
// out = sign(x) * max(|x| - kappa, 0)
void soft_threshold(std::span<const Real> x, Real kappa, std::span<Real> out);

Real sum(std::span<const Real> x);
Real sum_abs(std::span<const Real> x);
Real sum_squares(std::span<const Real> x);
Real dot(std::span<const Real> x, std::span<const Real> y);
Real sum_squared_difference(std::span<const Real> x, std::span<const Real> y);

// Forward differences with a zero last row/column (Neumann boundary).
void forward_gradient(std::span<const Real> f, int height, int width, std::span<Real> gx, std::span<Real> gy);
// Negative adjoint of forward_gradient.
void divergence(std::span<const Real> px, std::span<const Real> py, int height, int width, std::span<Real> out);
// Anisotropic total variation: sum |dx| + |dy|.
Real tv_norm(std::span<const Real> f, int height, int width);

// Central differences in the interior, one-sided on the border.
void central_gradient(std::span<const Real> f, int height, int width, std::span<Real> gx, std::span<Real> gy);

// Bilinear resampling at src = c + A (p - c) + v with clamped (nearest
// boundary) sampling outside the grid.
void warp_bilinear(std::span<const Real> src, int height, int width, const AffineParams& tau, std::span<Real> out);

namespace serial {

void compose(Labels h, std::span<const Real> b, std::span<const Real> f, std::span<const Real> r,
             std::span<Real> out);
void axpby(Real a, std::span<const Real> x, Real b, std::span<const Real> y, std::span<Real> out);
void soft_threshold(std::span<const Real> x, Real kappa, std::span<Real> out);
Real sum(std::span<const Real> x);
Real sum_abs(std::span<const Real> x);
Real sum_squares(std::span<const Real> x);
Real dot(std::span<const Real> x, std::span<const Real> y);
Real sum_squared_difference(std::span<const Real> x, std::span<const Real> y);
void forward_gradient(std::span<const Real> f, int height, int width, std::span<Real> gx, std::span<Real> gy);
void divergence(std::span<const Real> px, std::span<const Real> py, int height, int width, std::span<Real> out);
Real tv_norm(std::span<const Real> f, int height, int width);
void central_gradient(std::span<const Real> f, int height, int width, std::span<Real> gx, std::span<Real> gy);
void warp_bilinear(std::span<const Real> src, int height, int width, const AffineParams& tau, std::span<Real> out);

}  // namespace serial

}  // namespace derain::kernels
