#pragma once

// Periodic 2-D convolution through real-to-complex FFTs.
//
// Kernels are centred: tap (i, j) of a p x p kernel acts at offset
// (i - p/2, j - p/2), so a 1x1 kernel is a pure scaling and
//   (D (*) M)(y, x) = sum_ij D(i, j) M((y - i + p/2) mod h, (x - j + p/2) mod w).

#include <complex>
#include <vector>

#include "derain/frame.hpp"

namespace derain {

using Complex = std::complex<double>;

/// Half spectrum of a real h x w grid: h rows of (w/2 + 1) bins.
struct Spectrum {
  Shape grid;
  std::vector<Complex> bins;

  int half_width() const { return grid.width / 2 + 1; }
};

Spectrum forward_fft(const Frame& f);
/// Normalized inverse; forward then inverse reproduces the input.
Frame inverse_fft(const Spectrum& s);

/// Places a centred kernel on a periodic grid (tap offsets wrap around).
Frame embed_kernel(const Frame& kernel, Shape grid);
Spectrum kernel_spectrum(const Frame& kernel, Shape grid);

Frame convolve(const Frame& kernel, const Frame& map);

/// R = sum over all filters of D_ks (*) M_ks.
Frame convolve_sum(const FilterBank& bank, const FeatureMapSet& maps);

/// One partial sum per scale; their total equals convolve_sum.
std::vector<Frame> convolve_per_scale(const FilterBank& bank, const FeatureMapSet& maps);

/// c(dy, dx) = sum_p a(p) b(p + (dy, dx)), periodic.
Frame circular_cross_correlation(const Frame& a, const Frame& b);

}  // namespace derain
