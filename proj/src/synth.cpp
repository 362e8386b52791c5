#include "derain/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace derain {

namespace {

// mt19937_64 output is fully specified; the mapping to [0,1) is done here
// rather than by a std distribution so results do not depend on the library.
class Uniform {
 public:
  Uniform(std::uint64_t seed, std::uint64_t stream) : gen_(seed * 0x9E3779B97F4A7C15ULL ^ (stream + 0x632BE59BD9B4E019ULL)) {}
  double operator()() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 gen_;
};

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax;
  const double vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double s = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  const double dx = px - (ax + s * vx);
  const double dy = py - (ay + s * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

StreakParams StreakParams::at_frame(int frames) const {
  StreakParams q = *this;
  const double t = frames;
  q.angle = angle + angle_rate * t;
  q.length = std::max(1.0, length + length_rate * t);
  q.width = std::max(0.25, width + width_rate * t);
  q.density = std::max(0.0, density + density_rate * t);
  q.intensity = std::clamp(intensity + intensity_rate * t, 0.0, 1.0);
  return q;
}

StreakParams StreakParams::lerp(const StreakParams& a, const StreakParams& b, double s) {
  auto mix = [s](double x, double y) { return x + s * (y - x); };
  StreakParams q = a;
  q.angle = mix(a.angle, b.angle);
  q.length = mix(a.length, b.length);
  q.width = mix(a.width, b.width);
  q.density = mix(a.density, b.density);
  q.intensity = mix(a.intensity, b.intensity);
  return q;
}

void StreakParams::validate() const {
  if (!(density >= 0.0)) throw std::invalid_argument("StreakParams: density must be >= 0");
  if (!(intensity >= 0.0 && intensity <= 1.0)) throw std::invalid_argument("StreakParams: intensity must be in [0,1]");
  if (!(length > 0.0) || !(width > 0.0)) throw std::invalid_argument("StreakParams: length and width must be > 0");
}

RainySample synthesize_streaks(const Frame& clean, const StreakParams& p, std::uint64_t seed) {
  p.validate();
  const int h = clean.height();
  const int w = clean.width();
  RainySample out{clean, Frame(clean.shape())};
  const long count = std::lround(p.density * static_cast<double>(clean.size()) / 1000.0);
  if (p.intensity > 0.0) {
    for (long k = 0; k < count; ++k) {
      Uniform u(seed, static_cast<std::uint64_t>(k));
      const double cx = u() * w;
      const double cy = u() * h;
      const double angle = (p.angle + (u() - 0.5) * 6.0) * std::numbers::pi / 180.0;
      const double len = p.length * (0.75 + 0.5 * u());
      const double amp = p.intensity * (0.6 + 0.4 * u());
      const double dx = std::sin(angle) * 0.5 * len;
      const double dy = std::cos(angle) * 0.5 * len;
      const double half = 0.5 * p.width;
      const double reach = half + 1.0;
      const int x0 = std::max(0, static_cast<int>(std::floor(cx - std::abs(dx) - reach)));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + std::abs(dx) + reach)));
      const int y0 = std::max(0, static_cast<int>(std::floor(cy - std::abs(dy) - reach)));
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + std::abs(dy) + reach)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double dist = segment_distance(x, y, cx - dx, cy - dy, cx + dx, cy + dy);
          const double cover = std::clamp(half + 0.5 - dist, 0.0, 1.0);
          if (cover > 0.0) out.rain(y, x) += amp * cover;
        }
      }
    }
  }
  for (std::size_t i = 0; i < clean.size(); ++i) out.rainy[i] = std::clamp(clean[i] + out.rain[i], 0.0, 1.0);
  return out;
}

SceneGenerator::SceneGenerator(SceneParams p) : p_(p) {
  if (p_.height < kMinFrameSide || p_.width < kMinFrameSide) throw DimensionError("SceneGenerator: frame too small");
  if (p_.square < 1 || p_.square + 8 > p_.width || p_.square + 4 > p_.height)
    throw std::invalid_argument("SceneGenerator: square does not fit");
  if (p_.frames < 1) throw std::invalid_argument("SceneGenerator: need at least one frame");
}

Frame SceneGenerator::background(double dx, double dy) const {
  Uniform u(p_.seed, 0xB0B0ULL);
  const double two_pi = 2.0 * std::numbers::pi;
  const double ph0 = two_pi * u(), ph1 = two_pi * u(), ph2 = two_pi * u(), ph3 = two_pi * u();
  Frame f(p_.height, p_.width);
  for (int y = 0; y < p_.height; ++y) {
    for (int x = 0; x < p_.width; ++x) {
      const double sx = x + dx;
      const double sy = y + dy;
      f(y, x) = 0.42 + 0.12 * std::sin(two_pi * (sx / 37.0 + sy / 53.0) + ph0) +
                0.10 * std::cos(two_pi * (sx / 23.0 - sy / 31.0) + ph1) +
                0.07 * std::sin(two_pi * sy / 19.0 + ph2) * std::cos(two_pi * sx / 41.0 + ph3) +
                0.06 * std::sin(two_pi * (sx / 9.0 + sy / 13.0) + ph1) * std::cos(two_pi * (sy / 11.0 - sx / 17.0) + ph2) +
                0.10 * (sx / p_.width - 0.5);
    }
  }
  return f;
}

SceneFrame SceneGenerator::frame(int index) const {
  if (index < 0) throw std::invalid_argument("SceneGenerator: negative frame index");
  SceneFrame out;
  Uniform jitter(p_.seed, 0x1000000ULL + static_cast<std::uint64_t>(index));
  if (p_.jitter > 0.0) {
    out.shift_x = (2.0 * jitter() - 1.0) * p_.jitter;
    out.shift_y = (2.0 * jitter() - 1.0) * p_.jitter;
  }
  out.clean = background(out.shift_x, out.shift_y);

  // bounce between the margins
  const double lo = 4.0;
  const double span = p_.width - p_.square - 8.0;
  double pos = std::fmod(p_.square_speed * index, 2.0 * span);
  if (pos > span) pos = 2.0 * span - pos;
  const int sx = static_cast<int>(std::lround(lo + pos));
  const int sy = p_.height / 2 - p_.square / 2 + static_cast<int>(std::lround(2.0 * std::sin(0.3 * index)));
  out.object = SupportMask(out.clean.shape());
  for (int y = std::max(0, sy); y < std::min(p_.height, sy + p_.square); ++y) {
    for (int x = std::max(0, sx); x < std::min(p_.width, sx + p_.square); ++x) {
      out.clean(y, x) = p_.square_value;
      out.object.set(y, x, true);
    }
  }

  const double s = p_.frames > 1 ? std::min(1.0, static_cast<double>(index) / (p_.frames - 1)) : 0.0;
  const StreakParams rain = StreakParams::lerp(p_.rain_start, p_.rain_end, s);
  RainySample sample = synthesize_streaks(out.clean, rain, p_.seed * 1000003ULL + static_cast<std::uint64_t>(index));
  out.rainy = std::move(sample.rainy);
  out.rain = std::move(sample.rain);
  return out;
}

}  // namespace derain
