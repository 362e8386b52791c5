#pragma once

// Procedural rain with ground truth, and the synthetic test scenes used by
// the tests and the acceptance run.

#include <cstdint>
#include <vector>

#include "derain/frame.hpp"

namespace derain {

struct StreakParams {
  double angle = 10.0;     // degrees from vertical
  double length = 12.0;    // pixels
  double width = 1.0;      // pixels
  double density = 4.0;    // streaks per 1000 pixels
  double intensity = 0.5;  // peak added intensity, (0, 1]

  // per-frame linear drift of each field
  double angle_rate = 0.0;
  double length_rate = 0.0;
  double width_rate = 0.0;
  double density_rate = 0.0;
  double intensity_rate = 0.0;

  /// Parameters after `frames` frames of drift, clamped to valid ranges.
  StreakParams at_frame(int frames) const;
  /// Linear interpolation between two parameter sets, s in [0, 1].
  static StreakParams lerp(const StreakParams& a, const StreakParams& b, double s);
  void validate() const;
};

struct RainySample {
  Frame rainy;
  Frame rain;
};

/// Additive anti-aliased segments; rainy = clamp(clean + rain, 0, 1). The
/// k-th streak depends only on (seed, k), so a higher density adds streaks
/// without moving the existing ones.
RainySample synthesize_streaks(const Frame& clean, const StreakParams& p, std::uint64_t seed);

struct SceneParams {
  int height = 64;
  int width = 96;
  int frames = 40;
  int square = 12;             // side of the moving object
  double square_value = 0.9;
  double square_speed = 1.5;   // pixels per frame, bouncing horizontally
  double jitter = 0.0;         // max per-frame background translation, pixels
  StreakParams rain_start{10.0, 12.0, 1.2, 7.0, 0.45};
  StreakParams rain_end{10.0, 12.0, 1.2, 1.5, 0.45};
  std::uint64_t seed = 7;
};

struct SceneFrame {
  Frame clean;
  Frame rainy;
  Frame rain;
  SupportMask object;    // ground-truth object support
  double shift_x = 0.0;  // background translation applied to this frame
  double shift_y = 0.0;
};

/// Static smooth textured background, a moving bright square and rain whose
/// parameters move linearly from rain_start to rain_end over the sequence.
/// Frames are generated independently, so long sequences stream.
class SceneGenerator {
 public:
  explicit SceneGenerator(SceneParams p);
  const SceneParams& params() const { return p_; }
  SceneFrame frame(int index) const;  // index from 0
  /// Smooth background sampled at (x + dx, y + dy).
  Frame background(double dx, double dy) const;

 private:
  SceneParams p_;
};

}  // namespace derain
