#include "derain/metrics.hpp"

#include <array>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "derain/kernels.hpp"

namespace derain {

double psnr(const Frame& a, const Frame& b) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  if (a.size() == 0) throw DimensionError("psnr: empty frame");
  const double mse = kernels::sum_squared_difference(a.values(), b.values()) / static_cast<double>(a.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable valid-region filtering: output is (h - 10) x (w - 10).
Frame filter_valid(const Frame& f, const std::array<double, kWindow>& g) {
  const int h = f.height();
  const int w = f.width();
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  Frame rows(h, ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[static_cast<std::size_t>(k)] * f(y, x + k);
      rows(y, x) = acc;
    }
  Frame out(oh, ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[static_cast<std::size_t>(k)] * rows(y + k, x);
      out(y, x) = acc;
    }
  return out;
}

Frame product(const Frame& a, const Frame& b) {
  Frame out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace

double ssim(const Frame& a, const Frame& b) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  if (a.height() < kWindow || a.width() < kWindow) throw DimensionError("ssim: frame smaller than the 11x11 window");
  const auto g = gaussian_taps();
  const Frame mu_a = filter_valid(a, g);
  const Frame mu_b = filter_valid(b, g);
  const Frame aa = filter_valid(product(a, a), g);
  const Frame bb = filter_valid(product(b, b), g);
  const Frame ab = filter_valid(product(a, b), g);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = aa[i] - ma * ma;
    const double vb = bb[i] - mb * mb;
    const double cov = ab[i] - ma * mb;
    total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return total / static_cast<double>(mu_a.size());
}

std::string SequenceReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["frames"] = nlohmann::ordered_json::array();
  for (const auto& f : frames) doc["frames"].push_back({{"name", f.name}, {"psnr", f.psnr}, {"ssim", f.ssim}});
  doc["summary"] = {{"count", frames.size()}, {"mean_psnr", mean_psnr}, {"mean_ssim", mean_ssim}};
  return doc.dump(2) + "\n";
}

SequenceReport evaluate_sequence(const std::vector<Frame>& recovered, const std::vector<Frame>& reference,
                                 const std::vector<std::string>& names) {
  if (recovered.size() != reference.size())
    throw DimensionError("evaluate_sequence: " + std::to_string(recovered.size()) + " recovered frames vs " +
                         std::to_string(reference.size()) + " reference frames");
  if (!names.empty() && names.size() != recovered.size())
    throw DimensionError("evaluate_sequence: one name per frame required");
  SequenceReport rep;
  rep.frames.resize(recovered.size());
  const auto n = static_cast<std::ptrdiff_t>(recovered.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    rep.frames[k] = {names.empty() ? std::to_string(k) : names[k], psnr(recovered[k], reference[k]),
                     ssim(recovered[k], reference[k])};
  }
  return summarize(std::move(rep.frames));
}

SequenceReport summarize(std::vector<FrameScore> frames) {
  SequenceReport rep;
  rep.frames = std::move(frames);
  for (const auto& f : rep.frames) {
    rep.mean_psnr += f.psnr;
    rep.mean_ssim += f.ssim;
  }
  if (!rep.frames.empty()) {
    rep.mean_psnr /= static_cast<double>(rep.frames.size());
    rep.mean_ssim /= static_cast<double>(rep.frames.size());
  }
  return rep;
}

}  // namespace derain
