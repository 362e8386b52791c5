#pragma once

// Full-reference image quality for unit-peak frames.

#include <string>
#include <vector>

#include "derain/frame.hpp"

namespace derain {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE), capped at 100 dB when MSE < 1e-10.
double psnr(const Frame& a, const Frame& b);

/// Mean local SSIM over the valid region of an 11x11 Gaussian window
/// (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2.
double ssim(const Frame& a, const Frame& b);

struct FrameScore {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct SequenceReport {
  std::vector<FrameScore> frames;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  std::string to_json() const;
};

SequenceReport evaluate_sequence(const std::vector<Frame>& recovered, const std::vector<Frame>& reference,
                                 const std::vector<std::string>& names = {});

/// Arithmetic means over already scored frames.
SequenceReport summarize(std::vector<FrameScore> frames);

}  // namespace derain
