#include "derain/fft_conv.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace derain {

namespace {

// The FFTW planner is not thread safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlan {
 public:
  explicit FftPlan(Shape grid) : grid_(grid), half_(grid.width / 2 + 1) {
    const std::size_t n_real = grid.size();
    const std::size_t n_cplx = static_cast<std::size_t>(grid.height) * half_;
    real_ = fftw_alloc_real(n_real);
    cplx_ = fftw_alloc_complex(n_cplx);
    std::lock_guard lock(planner_mutex());
    r2c_ = fftw_plan_dft_r2c_2d(grid.height, grid.width, real_, cplx_, FFTW_ESTIMATE);
    c2r_ = fftw_plan_dft_c2r_2d(grid.height, grid.width, cplx_, real_, FFTW_ESTIMATE);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
    fftw_free(real_);
    fftw_free(cplx_);
  }

  Spectrum forward(const Frame& f) {
    std::copy(f.values().begin(), f.values().end(), real_);
    fftw_execute(r2c_);
    Spectrum s{grid_, std::vector<Complex>(static_cast<std::size_t>(grid_.height) * half_)};
    std::memcpy(static_cast<void*>(s.bins.data()), cplx_, s.bins.size() * sizeof(Complex));
    return s;
  }

  Frame inverse(const Spectrum& s) {
    // c2r destroys its input, so it always runs on the private buffer
    std::memcpy(cplx_, static_cast<const void*>(s.bins.data()), s.bins.size() * sizeof(Complex));
    fftw_execute(c2r_);
    Frame f(grid_);
    const double scale = 1.0 / static_cast<double>(grid_.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = real_[i] * scale;
    return f;
  }

 private:
  Shape grid_;
  int half_;
  double* real_ = nullptr;
  fftw_complex* cplx_ = nullptr;
  fftw_plan r2c_ = nullptr;
  fftw_plan c2r_ = nullptr;
};

FftPlan& plan_for(Shape grid) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<FftPlan>> cache;
  auto& slot = cache[{grid.height, grid.width}];
  if (!slot) slot = std::make_unique<FftPlan>(grid);
  return *slot;
}

void require_nonempty(Shape g) {
  if (g.height < 1 || g.width < 1) throw DimensionError("FFT on an empty grid");
}

}  // namespace

Spectrum forward_fft(const Frame& f) {
  require_nonempty(f.shape());
  return plan_for(f.shape()).forward(f);
}

Frame inverse_fft(const Spectrum& s) {
  require_nonempty(s.grid);
  if (s.bins.size() != static_cast<std::size_t>(s.grid.height) * s.half_width())
    throw DimensionError("inverse_fft: spectrum size does not match its grid");
  return plan_for(s.grid).inverse(s);
}

Frame embed_kernel(const Frame& kernel, Shape grid) {
  if (kernel.height() > grid.height || kernel.width() > grid.width)
    throw DimensionError("embed_kernel: kernel " + to_string(kernel.shape()) + " larger than grid " + to_string(grid));
  Frame out(grid);
  const int cy = kernel.height() / 2;
  const int cx = kernel.width() / 2;
  for (int i = 0; i < kernel.height(); ++i) {
    const int y = ((i - cy) % grid.height + grid.height) % grid.height;
    for (int j = 0; j < kernel.width(); ++j) {
      const int x = ((j - cx) % grid.width + grid.width) % grid.width;
      out(y, x) += kernel(i, j);
    }
  }
  return out;
}

Spectrum kernel_spectrum(const Frame& kernel, Shape grid) { return forward_fft(embed_kernel(kernel, grid)); }

Frame convolve(const Frame& kernel, const Frame& map) {
  Spectrum k = kernel_spectrum(kernel, map.shape());
  const Spectrum m = forward_fft(map);
  for (std::size_t i = 0; i < k.bins.size(); ++i) k.bins[i] *= m.bins[i];
  return inverse_fft(k);
}

namespace {

void check_maps(const FilterBank& bank, const FeatureMapSet& maps) {
  if (maps.size() != bank.filter_count())
    throw DimensionError("convolve_sum: " + std::to_string(maps.size()) + " maps for " +
                         std::to_string(bank.filter_count()) + " filters");
  for (const auto& m : maps) require_same_shape(m.shape(), maps.front().shape(), "convolve_sum map");
}

}  // namespace

std::vector<Frame> convolve_per_scale(const FilterBank& bank, const FeatureMapSet& maps) {
  check_maps(bank, maps);
  const Shape grid = maps.front().shape();
  std::vector<Frame> out;
  out.reserve(bank.scale_count());
  for (std::size_t k = 0; k < bank.scale_count(); ++k) {
    Spectrum acc{grid, std::vector<Complex>(static_cast<std::size_t>(grid.height) * (grid.width / 2 + 1))};
    for (int s = 0; s < bank.scales()[k].filter_count; ++s) {
      const std::size_t i = bank.flat_index(k, static_cast<std::size_t>(s));
      const Spectrum d = kernel_spectrum(bank.filter(i), grid);
      const Spectrum m = forward_fft(maps[i]);
      for (std::size_t b = 0; b < acc.bins.size(); ++b) acc.bins[b] += d.bins[b] * m.bins[b];
    }
    out.push_back(inverse_fft(acc));
  }
  return out;
}

Frame convolve_sum(const FilterBank& bank, const FeatureMapSet& maps) {
  check_maps(bank, maps);
  const Shape grid = maps.front().shape();
  Spectrum acc{grid, std::vector<Complex>(static_cast<std::size_t>(grid.height) * (grid.width / 2 + 1))};
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const Spectrum d = kernel_spectrum(bank.filter(i), grid);
    const Spectrum m = forward_fft(maps[i]);
    for (std::size_t b = 0; b < acc.bins.size(); ++b) acc.bins[b] += d.bins[b] * m.bins[b];
  }
  return inverse_fft(acc);
}

Frame circular_cross_correlation(const Frame& a, const Frame& b) {
  require_same_shape(a.shape(), b.shape(), "circular_cross_correlation");
  Spectrum fa = forward_fft(a);
  const Spectrum fb = forward_fft(b);
  for (std::size_t i = 0; i < fa.bins.size(); ++i) fa.bins[i] = std::conj(fa.bins[i]) * fb.bins[i];
  return inverse_fft(fa);
}

}  // namespace derain
