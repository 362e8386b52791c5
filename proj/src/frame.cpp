#include "derain/frame.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "derain/kernels.hpp"

namespace derain {

std::string to_string(Shape s) { return std::to_string(s.height) + "x" + std::to_string(s.width); }

void require_same_shape(Shape a, Shape b, const char* what) {
  if (a != b) throw DimensionError(std::string(what) + ": shape " + to_string(a) + " does not match " + to_string(b));
}

Frame::Frame(int height, int width, double fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw DimensionError("Frame: negative dimension");
  values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

Frame::Frame(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height < 0 || width < 0) throw DimensionError("Frame: negative dimension");
  if (values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
    throw DimensionError("Frame: value count does not match " + to_string(shape()));
}

bool Frame::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Frame::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Frame& Frame::operator+=(const Frame& o) {
  require_same_shape(shape(), o.shape(), "Frame +=");
  kernels::axpby(1.0, values_, 1.0, o.values_, values_);
  return *this;
}

Frame& Frame::operator-=(const Frame& o) {
  require_same_shape(shape(), o.shape(), "Frame -=");
  kernels::axpby(1.0, values_, -1.0, o.values_, values_);
  return *this;
}

Frame& Frame::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

Frame operator+(Frame a, const Frame& b) { return a += b; }
Frame operator-(Frame a, const Frame& b) { return a -= b; }
Frame operator*(Frame a, double s) { return a *= s; }
Frame operator*(double s, Frame a) { return a *= s; }

double sum(const Frame& f) { return kernels::sum(f.values()); }
double sum_abs(const Frame& f) { return kernels::sum_abs(f.values()); }
double sum_squares(const Frame& f) { return kernels::sum_squares(f.values()); }

double dot(const Frame& a, const Frame& b) {
  require_same_shape(a.shape(), b.shape(), "dot");
  return kernels::dot(a.values(), b.values());
}

double frobenius_norm(const Frame& f) { return std::sqrt(sum_squares(f)); }

double max_abs_difference(const Frame& a, const Frame& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_difference");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

SupportMask::SupportMask(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw DimensionError("SupportMask: negative dimension");
  if (fill > 1) throw std::invalid_argument("SupportMask: labels must be 0 or 1");
  labels_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

SupportMask::SupportMask(int height, int width, std::vector<std::uint8_t> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (labels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
    throw DimensionError("SupportMask: label count does not match " + to_string(shape()));
  if (std::any_of(labels_.begin(), labels_.end(), [](std::uint8_t v) { return v > 1; }))
    throw std::invalid_argument("SupportMask: labels must be 0 or 1");
}

SupportMask SupportMask::complement() const {
  SupportMask out = *this;
  for (auto& v : out.labels_) v = static_cast<std::uint8_t>(1 - v);
  return out;
}

std::size_t SupportMask::count() const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), std::uint8_t{1}));
}

std::vector<ScaleSpec> default_scales() { return {{13, 3}, {9, 3}, {3, 3}}; }

FilterBank::FilterBank(std::vector<ScaleSpec> scales, std::vector<Frame> filters)
    : scales_(std::move(scales)), filters_(std::move(filters)) {
  if (scales_.empty()) throw std::invalid_argument("FilterBank: at least one scale required");
  std::size_t expected = 0;
  for (std::size_t k = 0; k < scales_.size(); ++k) {
    const auto& sc = scales_[k];
    if (sc.patch_size < 1 || sc.patch_size % 2 == 0)
      throw std::invalid_argument("FilterBank: patch sizes must be odd and positive");
    if (sc.filter_count < 1) throw std::invalid_argument("FilterBank: each scale needs at least one filter");
    if (k > 0 && sc.patch_size >= scales_[k - 1].patch_size)
      throw std::invalid_argument("FilterBank: patch sizes must strictly decrease across scales");
    scale_begin_.push_back(expected);
    expected += static_cast<std::size_t>(sc.filter_count);
  }
  if (filters_.size() != expected) throw std::invalid_argument("FilterBank: filter count does not match scales");
  for (std::size_t i = 0; i < filters_.size(); ++i) {
    const int p = scales_[scale_of(i)].patch_size;
    if (filters_[i].height() != p || filters_[i].width() != p)
      throw DimensionError("FilterBank: filter size does not match its scale");
    if (sum_squares(filters_[i]) > 1.0 + 1e-12) throw std::invalid_argument("FilterBank: filter outside unit ball");
  }
}

std::size_t FilterBank::flat_index(std::size_t k, std::size_t s) const {
  if (k >= scales_.size() || s >= static_cast<std::size_t>(scales_[k].filter_count))
    throw std::out_of_range("FilterBank: filter index out of range");
  return scale_begin_[k] + s;
}

std::size_t FilterBank::scale_of(std::size_t flat) const {
  if (flat >= filters_.size()) throw std::out_of_range("FilterBank: filter index out of range");
  const auto it = std::upper_bound(scale_begin_.begin(), scale_begin_.end(), flat);
  return static_cast<std::size_t>(std::distance(scale_begin_.begin(), it)) - 1;
}

int FilterBank::largest_patch() const { return scales_.empty() ? 0 : scales_.front().patch_size; }

void FilterBank::set_filter(std::size_t i, Frame f) {
  if (i >= filters_.size()) throw std::out_of_range("FilterBank: filter index out of range");
  require_same_shape(filters_[i].shape(), f.shape(), "FilterBank::set_filter");
  if (sum_squares(f) > 1.0 + 1e-12) throw std::invalid_argument("FilterBank: filter outside unit ball");
  filters_[i] = std::move(f);
}

FilterBank make_streak_bank(const std::vector<ScaleSpec>& scales) {
  constexpr double kSpreadDeg = 20.0;
  std::vector<Frame> filters;
  for (const auto& sc : scales) {
    const int p = sc.patch_size;
    const double c = 0.5 * (p - 1);
    const double sigma_along = std::max(0.75, p / 4.0);
    const double sigma_across = std::max(0.6, p / 16.0);
    for (int s = 0; s < sc.filter_count; ++s) {
      const double deg = (s - 0.5 * (sc.filter_count - 1)) * kSpreadDeg;
      const double th = deg * std::numbers::pi / 180.0;
      // unit vector along the streak, measured from vertical
      const double ax = std::sin(th);
      const double ay = std::cos(th);
      Frame k(p, p);
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          const double dx = x - c;
          const double dy = y - c;
          const double along = dx * ax + dy * ay;
          const double across = -dx * ay + dy * ax;
          k(y, x) = std::exp(-0.5 * (along * along / (sigma_along * sigma_along) +
                                     across * across / (sigma_across * sigma_across)));
        }
      }
      k *= 1.0 / frobenius_norm(k);
      // rounding can leave the norm a hair above one
      const double n2 = sum_squares(k);
      if (n2 > 1.0) k *= 1.0 / std::sqrt(n2) * (1.0 - 1e-15);
      filters.push_back(std::move(k));
    }
  }
  return FilterBank(scales, std::move(filters));
}

FeatureMapSet zero_maps(const FilterBank& bank, Shape grid) {
  return FeatureMapSet(bank.filter_count(), Frame(grid));
}

Frame elementwise_compose(const Frame& x, const Frame& background, const Frame& object, const Frame& rain,
                          const SupportMask& mask) {
  require_same_shape(x.shape(), background.shape(), "elementwise_compose background");
  require_same_shape(x.shape(), object.shape(), "elementwise_compose object layer");
  require_same_shape(x.shape(), rain.shape(), "elementwise_compose rain layer");
  require_same_shape(x.shape(), mask.shape(), "elementwise_compose mask");
  Frame out(x.shape());
  kernels::compose(mask.labels(), background.values(), object.values(), rain.values(), out.values());
  return out;
}

Frame recover(const Frame& background, const Frame& object, const SupportMask& mask) {
  require_same_shape(background.shape(), object.shape(), "recover object layer");
  require_same_shape(background.shape(), mask.shape(), "recover mask");
  Frame out(background.shape());
  const Frame zero(background.shape());
  kernels::compose(mask.labels(), background.values(), object.values(), zero.values(), out.values());
  return out;
}

double ScaleParams::mean() const {
  if (b.empty()) return 0.0;
  return std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
}

}  // namespace derain
