#include "derain/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace derain::kernels {

namespace {

inline Real shrink(Real v, Real kappa) {
  const Real mag = std::abs(v) - kappa;
  if (mag <= 0.0) return 0.0;
  return v > 0.0 ? mag : -mag;
}

inline Real sample_clamped(const Real* src, int height, int width, Real sx, Real sy) {
  sx = std::clamp(sx, 0.0, static_cast<Real>(width - 1));
  sy = std::clamp(sy, 0.0, static_cast<Real>(height - 1));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const Real fx = sx - x0;
  const Real fy = sy - y0;
  const Real* r0 = src + static_cast<std::size_t>(y0) * width;
  const Real* r1 = src + static_cast<std::size_t>(y1) * width;
  const Real top = r0[x0] + fx * (r0[x1] - r0[x0]);
  const Real bottom = r1[x0] + fx * (r1[x1] - r1[x0]);
  return top + fy * (bottom - top);
}

inline void warp_row(const Real* src, int height, int width, const AffineParams& t, int y, Real* out) {
  const Real cx = 0.5 * (width - 1);
  const Real cy = 0.5 * (height - 1);
  const Real yc = y - cy;
  for (int x = 0; x < width; ++x) {
    const Real xc = x - cx;
    const Real sx = cx + t[0] * xc + t[1] * yc + t[4];
    const Real sy = cy + t[2] * xc + t[3] * yc + t[5];
    out[x] = sample_clamped(src, height, width, sx, sy);
  }
}

inline void central_row(const Real* f, int height, int width, int y, Real* gx, Real* gy) {
  const Real* row = f + static_cast<std::size_t>(y) * width;
  for (int x = 0; x < width; ++x) {
    if (width == 1) {
      gx[x] = 0.0;
    } else if (x == 0) {
      gx[x] = row[1] - row[0];
    } else if (x == width - 1) {
      gx[x] = row[x] - row[x - 1];
    } else {
      gx[x] = 0.5 * (row[x + 1] - row[x - 1]);
    }
    if (height == 1) {
      gy[x] = 0.0;
    } else if (y == 0) {
      gy[x] = f[static_cast<std::size_t>(width) + x] - row[x];
    } else if (y == height - 1) {
      gy[x] = row[x] - f[static_cast<std::size_t>(y - 1) * width + x];
    } else {
      gy[x] = 0.5 * (f[static_cast<std::size_t>(y + 1) * width + x] - f[static_cast<std::size_t>(y - 1) * width + x]);
    }
  }
}

inline Real tv_row(const Real* f, int height, int width, int y) {
  const Real* row = f + static_cast<std::size_t>(y) * width;
  Real acc = 0.0;
  for (int x = 0; x + 1 < width; ++x) acc += std::abs(row[x + 1] - row[x]);
  if (y + 1 < height) {
    const Real* next = row + width;
    for (int x = 0; x < width; ++x) acc += std::abs(next[x] - row[x]);
  }
  return acc;
}

// Fixed-block reduction: block partials in parallel, ordered final sum.
template <class Body>
Real blocked_reduce(std::size_t n, Body body) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  if (blocks <= 1) return body(0, n);
  std::vector<Real> partial(blocks, 0.0);
  const auto nb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kReductionBlock;
    const std::size_t hi = std::min(n, lo + kReductionBlock);
    partial[static_cast<std::size_t>(b)] = body(lo, hi);
  }
  Real acc = 0.0;
  for (Real p : partial) acc += p;
  return acc;
}

}  // namespace

void compose(Labels h, std::span<const Real> b, std::span<const Real> f, std::span<const Real> r,
             std::span<Real> out) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = (1.0 - h[i]) * b[i] + h[i] * f[i] + r[i];
}

void axpby(Real a, std::span<const Real> x, Real b, std::span<const Real> y, std::span<Real> out) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void soft_threshold(std::span<const Real> x, Real kappa, std::span<Real> out) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = shrink(x[i], kappa);
}

Real sum(std::span<const Real> x) {
  return blocked_reduce(x.size(), [&](std::size_t lo, std::size_t hi) {
    Real acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += x[i];
    return acc;
  });
}

Real sum_abs(std::span<const Real> x) {
  return blocked_reduce(x.size(), [&](std::size_t lo, std::size_t hi) {
    Real acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += std::abs(x[i]);
    return acc;
  });
}

Real sum_squares(std::span<const Real> x) {
  return blocked_reduce(x.size(), [&](std::size_t lo, std::size_t hi) {
    Real acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += x[i] * x[i];
    return acc;
  });
}

Real dot(std::span<const Real> x, std::span<const Real> y) {
  return blocked_reduce(x.size(), [&](std::size_t lo, std::size_t hi) {
    Real acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += x[i] * y[i];
    return acc;
  });
}

Real sum_squared_difference(std::span<const Real> x, std::span<const Real> y) {
  return blocked_reduce(x.size(), [&](std::size_t lo, std::size_t hi) {
    Real acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const Real d = x[i] - y[i];
      acc += d * d;
    }
    return acc;
  });
}

void forward_gradient(std::span<const Real> f, int height, int width, std::span<Real> gx, std::span<Real> gy) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      const std::size_t i = row + x;
      gx[i] = x + 1 < width ? f[i + 1] - f[i] : 0.0;
      gy[i] = y + 1 < height ? f[i + width] - f[i] : 0.0;
    }
  }
}

void divergence(std::span<const Real> px, std::span<const Real> py, int height, int width, std::span<Real> out) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      const std::size_t i = row + x;
      Real d = 0.0;
      if (x + 1 < width) d += px[i];
      if (x > 0) d -= px[i - 1];
      if (y + 1 < height) d += py[i];
      if (y > 0) d -= py[i - width];
      out[i] = d;
    }
  }
}

Real tv_norm(std::span<const Real> f, int height, int width) {
  std::vector<Real> rows(static_cast<std::size_t>(height));
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = tv_row(f.data(), height, width, y);
  Real acc = 0.0;
  for (Real r : rows) acc += r;
  return acc;
}

void central_gradient(std::span<const Real> f, int height, int width, std::span<Real> gx, std::span<Real> gy) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * width;
    central_row(f.data(), height, width, y, gx.data() + row, gy.data() + row);
  }
}

void warp_bilinear(std::span<const Real> src, int height, int width, const AffineParams& tau, std::span<Real> out) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y)
    warp_row(src.data(), height, width, tau, y, out.data() + static_cast<std::size_t>(y) * width);
}

namespace serial {

void compose(Labels h, std::span<const Real> b, std::span<const Real> f, std::span<const Real> r,
             std::span<Real> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - h[i]) * b[i] + h[i] * f[i] + r[i];
}

void axpby(Real a, std::span<const Real> x, Real b, std::span<const Real> y, std::span<Real> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
}

void soft_threshold(std::span<const Real> x, Real kappa, std::span<Real> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = shrink(x[i], kappa);
}

Real sum(std::span<const Real> x) {
  Real acc = 0.0;
  for (Real v : x) acc += v;
  return acc;
}

Real sum_abs(std::span<const Real> x) {
  Real acc = 0.0;
  for (Real v : x) acc += std::abs(v);
  return acc;
}

Real sum_squares(std::span<const Real> x) {
  Real acc = 0.0;
  for (Real v : x) acc += v * v;
  return acc;
}

Real dot(std::span<const Real> x, std::span<const Real> y) {
  Real acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

Real sum_squared_difference(std::span<const Real> x, std::span<const Real> y) {
  Real acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return acc;
}

void forward_gradient(std::span<const Real> f, int height, int width, std::span<Real> gx, std::span<Real> gy) {
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      gx[i] = x + 1 < width ? f[i + 1] - f[i] : 0.0;
      gy[i] = y + 1 < height ? f[i + width] - f[i] : 0.0;
    }
  }
}

void divergence(std::span<const Real> px, std::span<const Real> py, int height, int width, std::span<Real> out) {
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      Real d = 0.0;
      if (x + 1 < width) d += px[i];
      if (x > 0) d -= px[i - 1];
      if (y + 1 < height) d += py[i];
      if (y > 0) d -= py[i - width];
      out[i] = d;
    }
  }
}

Real tv_norm(std::span<const Real> f, int height, int width) {
  Real acc = 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      if (x + 1 < width) acc += std::abs(f[i + 1] - f[i]);
      if (y + 1 < height) acc += std::abs(f[i + width] - f[i]);
    }
  }
  return acc;
}

void central_gradient(std::span<const Real> f, int height, int width, std::span<Real> gx, std::span<Real> gy) {
  for (int y = 0; y < height; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * width;
    central_row(f.data(), height, width, y, gx.data() + row, gy.data() + row);
  }
}

void warp_bilinear(std::span<const Real> src, int height, int width, const AffineParams& tau, std::span<Real> out) {
  for (int y = 0; y < height; ++y)
    warp_row(src.data(), height, width, tau, y, out.data() + static_cast<std::size_t>(y) * width);
}

}  // namespace serial

}  // namespace derain::kernels
