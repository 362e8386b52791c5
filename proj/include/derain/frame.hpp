#pragma once

// Core grid types shared by every solver: intensity frames, binary support
// masks, multi-scale filter banks and their coefficient maps.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace derain {

/// Thrown whenever two grids that must agree in size do not.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape {
  int height = 0;
  int width = 0;

  std::size_t size() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  bool operator==(const Shape&) const = default;
};

std::string to_string(Shape s);

/// Smallest frame the online engine accepts.
inline constexpr int kMinFrameSide = 16;

/// Single-channel real grid, row-major. Working intensity range is [0,1]
/// but the type itself holds any finite real (rain layers are signed).
class Frame {
 public:
  Frame() = default;
  Frame(int height, int width, double fill = 0.0);
  Frame(int height, int width, std::vector<double> values);
  explicit Frame(Shape shape, double fill = 0.0) : Frame(shape.height, shape.width, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  Shape shape() const { return {height_, width_}; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(int y, int x) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator()(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool all_finite() const;
  void fill(double v);

  Frame& operator+=(const Frame& o);
  Frame& operator-=(const Frame& o);
  Frame& operator*=(double s);

  bool operator==(const Frame&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

Frame operator+(Frame a, const Frame& b);
Frame operator-(Frame a, const Frame& b);
Frame operator*(Frame a, double s);
Frame operator*(double s, Frame a);

double sum(const Frame& f);
double sum_abs(const Frame& f);
double sum_squares(const Frame& f);
double dot(const Frame& a, const Frame& b);
double frobenius_norm(const Frame& f);
double max_abs_difference(const Frame& a, const Frame& b);

/// Throws DimensionError unless both grids have the same shape.
void require_same_shape(Shape a, Shape b, const char* what);

/// Binary per-pixel labeling: 1 = moving object, 0 = background.
class SupportMask {
 public:
  SupportMask() = default;
  SupportMask(int height, int width, std::uint8_t fill = 0);
  SupportMask(int height, int width, std::vector<std::uint8_t> labels);
  explicit SupportMask(Shape shape, std::uint8_t fill = 0) : SupportMask(shape.height, shape.width, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  Shape shape() const { return {height_, width_}; }
  std::size_t size() const { return labels_.size(); }

  std::uint8_t operator()(int y, int x) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t operator[](std::size_t i) const { return labels_[i]; }
  void set(std::size_t i, bool on) { labels_[i] = on ? 1 : 0; }
  void set(int y, int x, bool on) { set(static_cast<std::size_t>(y) * width_ + x, on); }

  std::span<const std::uint8_t> labels() const { return labels_; }

  /// H^perp, so that mask + complement is all ones.
  SupportMask complement() const;
  std::size_t count() const;

  bool operator==(const SupportMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> labels_;
};

struct ScaleSpec {
  int patch_size = 0;
  int filter_count = 0;
  bool operator==(const ScaleSpec&) const = default;
};

/// The default 13x13 / 9x9 / 3x3 pyramid with three filters per scale.
std::vector<ScaleSpec> default_scales();

/// Multi-scale dictionary. Filters are stored flat, scale-major: all filters
/// of scale 0, then scale 1, ... Each filter is a p_k x p_k Frame.
class FilterBank {
 public:
  FilterBank() = default;
  /// Validates odd, strictly decreasing patch sizes and unit-ball filters.
  FilterBank(std::vector<ScaleSpec> scales, std::vector<Frame> filters);

  const std::vector<ScaleSpec>& scales() const { return scales_; }
  std::size_t filter_count() const { return filters_.size(); }
  std::size_t scale_count() const { return scales_.size(); }

  const Frame& filter(std::size_t i) const { return filters_[i]; }
  const Frame& filter(std::size_t k, std::size_t s) const { return filters_[flat_index(k, s)]; }
  const std::vector<Frame>& filters() const { return filters_; }

  std::size_t flat_index(std::size_t k, std::size_t s) const;
  std::size_t scale_of(std::size_t flat) const;
  int largest_patch() const;

  /// Replaces one filter; the replacement must keep the same size and lie
  /// in the unit Frobenius ball.
  void set_filter(std::size_t i, Frame f);

  bool operator==(const FilterBank&) const = default;

 private:
  std::vector<ScaleSpec> scales_;
  std::vector<Frame> filters_;
  std::vector<std::size_t> scale_begin_;
};

/// Unit-norm oriented Gaussian streak kernels: for every scale, filter s is
/// elongated along an angle spread symmetrically about vertical.
FilterBank make_streak_bank(const std::vector<ScaleSpec>& scales);

/// One coefficient map per filter, indexed like FilterBank's flat order.
using FeatureMapSet = std::vector<Frame>;

FeatureMapSet zero_maps(const FilterBank& bank, Shape grid);

/// Per-filter Laplacian scale b_ks, all strictly positive.
struct ScaleParams {
  std::vector<double> b;

  std::size_t size() const { return b.size(); }
  double mean() const;
  bool operator==(const ScaleParams&) const = default;
};

/// Model prediction H^perp o B + H o F + R. X only fixes the expected shape;
/// the residual E = X - prediction is obtained by subtraction.
Frame elementwise_compose(const Frame& x, const Frame& background, const Frame& object, const Frame& rain,
                          const SupportMask& mask);

/// H^perp o B + H o F, the recovered (rain-free) frame.
Frame recover(const Frame& background, const Frame& object, const SupportMask& mask);

}  // namespace derain
