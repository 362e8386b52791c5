#include <doctest.h>

#include <algorithm>

#include "derain/metrics.hpp"
#include "derain/synth.hpp"
#include "support.hpp"

using namespace derain;
using derain::testing::random_frame;
using derain::testing::smooth_image;

namespace {

// Direct-definition SSIM: for every valid 11x11 window, Gaussian-weighted
// moments computed from scratch.
double naive_ssim(const Frame& a, const Frame& b) {
  double g[11][11], total = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      total += g[i][j];
    }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0.0;
  int n = 0;
  for (int y = 0; y + 11 <= a.height(); ++y)
    for (int x = 0; x + 11 <= a.width(); ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i][j] / total, va = a(y + i, x + j), vb = b(y + i, x + j);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++n;
    }
  return acc / n;
}

}  // namespace

TEST_CASE("synthesize_streaks trivial parameters") {
  const Frame clean = smooth_image(32, 40);
  StreakParams p;
  p.density = 0.0;
  RainySample s = synthesize_streaks(clean, p, 1);
  CHECK(s.rainy == clean);
  CHECK(sum_abs(s.rain) == 0.0);
  p = StreakParams{};
  p.intensity = 0.0;
  s = synthesize_streaks(clean, p, 1);
  CHECK(s.rainy == clean);
  CHECK(sum_abs(s.rain) == 0.0);

  p = StreakParams{};
  p.intensity = 1.5;
  CHECK_THROWS(synthesize_streaks(clean, p, 1));
  p = StreakParams{};
  p.density = -1.0;
  CHECK_THROWS(synthesize_streaks(clean, p, 1));
}

TEST_CASE("synthesize_streaks ground truth") {
  const Frame clean = smooth_image(48, 48);
  StreakParams p;
  p.density = 8.0;
  const RainySample s = synthesize_streaks(clean, p, 42);
  CHECK(sum_abs(s.rain) > 0.0);
  CHECK(synthesize_streaks(clean, p, 42).rain == s.rain);
  CHECK_FALSE(synthesize_streaks(clean, p, 43).rain == s.rain);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(s.rain[i] >= 0.0);
    CHECK(s.rainy[i] >= 0.0);
    CHECK(s.rainy[i] <= 1.0);
    if (clean[i] + s.rain[i] <= 1.0) CHECK(s.rainy[i] - clean[i] == doctest::Approx(s.rain[i]).epsilon(1e-12));
  }
}

TEST_CASE("streak mass never decreases with density") {
  const Frame clean(40, 40, 0.2);
  StreakParams p;
  double last = 0.0;
  for (double d : {0.0, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    p.density = d;
    const double mass = sum_abs(synthesize_streaks(clean, p, 9).rain);
    CHECK(mass >= last);
    last = mass;
  }
}

TEST_CASE("streak parameter drift") {
  StreakParams a{10.0, 12.0, 1.0, 6.0, 0.5};
  const StreakParams b{20.0, 8.0, 2.0, 2.0, 0.3};
  const StreakParams m = StreakParams::lerp(a, b, 0.25);
  CHECK(m.angle == doctest::Approx(12.5));
  CHECK(m.length == doctest::Approx(11.0));
  CHECK(m.density == doctest::Approx(5.0));
  CHECK(m.intensity == doctest::Approx(0.45));
  a.density_rate = -0.5;
  a.intensity_rate = 0.1;
  const StreakParams later = a.at_frame(20);
  CHECK(later.density == 0.0);
  CHECK(later.intensity == 1.0);
  CHECK(a.at_frame(4).density == doctest::Approx(4.0));
}

TEST_CASE("scene generator") {
  SceneParams sp;
  sp.height = 32;
  sp.width = 40;
  sp.jitter = 1.0;
  const SceneGenerator g(sp);
  const SceneFrame f0 = g.frame(0), f0b = g.frame(0), f5 = g.frame(5);
  CHECK(f0.rainy == f0b.rainy);
  CHECK(f0.clean.shape() == Shape{32, 40});
  CHECK(f5.object.count() > 0);
  CHECK(std::abs(f5.shift_x) <= 1.0);
  CHECK(std::abs(f5.shift_y) <= 1.0);
  for (std::size_t i = 0; i < f5.clean.size(); ++i)
    if (f5.clean[i] + f5.rain[i] <= 1.0) CHECK(f5.rainy[i] == doctest::Approx(f5.clean[i] + f5.rain[i]).epsilon(1e-12));
}

TEST_CASE("psnr") {
  std::mt19937_64 rng(1);
  const Frame a = random_frame(rng, 20, 20);
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(psnr(Frame(8, 8, 0.3), Frame(8, 8, 0.4)) == doctest::Approx(20.0).epsilon(1e-12));
  const Frame b = random_frame(rng, 20, 20);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  CHECK(std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / mse)) <= 1e-10);
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK_THROWS_AS(psnr(a, Frame(20, 21)), DimensionError);
}

TEST_CASE("ssim") {
  std::mt19937_64 rng(2);
  const Frame a = random_frame(rng, 24, 30);
  const Frame b = random_frame(rng, 24, 30);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ssim(a, Frame(24, 30, 1.0) - a) < 1.0);
  CHECK(std::abs(ssim(a, b) - naive_ssim(a, b)) <= 1e-8);
  const Frame s = smooth_image(24, 30);
  CHECK(std::abs(ssim(s, a) - naive_ssim(s, a)) <= 1e-8);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12);
  CHECK_THROWS_AS(ssim(Frame(10, 30), Frame(10, 30)), DimensionError);
}

TEST_CASE("evaluate_sequence") {
  std::mt19937_64 rng(3);
  std::vector<Frame> rec, ref;
  for (int i = 0; i < 5; ++i) {
    ref.push_back(random_frame(rng, 16, 16));
    rec.push_back(ref.back() + random_frame(rng, 16, 16, -0.05, 0.05));
  }
  const SequenceReport same = evaluate_sequence(ref, ref);
  CHECK(same.mean_psnr == kPsnrCap);
  CHECK(same.mean_ssim == doctest::Approx(1.0));

  const SequenceReport one = evaluate_sequence({rec[0]}, {ref[0]}, {"a"});
  REQUIRE(one.frames.size() == 1);
  CHECK(one.mean_psnr == psnr(rec[0], ref[0]));
  CHECK(one.mean_ssim == ssim(rec[0], ref[0]));
  CHECK(one.frames[0].name == "a");

  const SequenceReport full = evaluate_sequence(rec, ref);
  std::vector<int> order{3, 0, 4, 1, 2};
  std::vector<Frame> prec, pref;
  for (int i : order) {
    prec.push_back(rec[i]);
    pref.push_back(ref[i]);
  }
  const SequenceReport perm = evaluate_sequence(prec, pref);
  CHECK(perm.mean_psnr == doctest::Approx(full.mean_psnr).epsilon(1e-14));
  CHECK(perm.mean_ssim == doctest::Approx(full.mean_ssim).epsilon(1e-14));
  CHECK_THROWS(evaluate_sequence(rec, {ref[0]}));

  const std::string json = full.to_json();
  CHECK(json.find("\"summary\"") != std::string::npos);
  CHECK(json.find("\"mean_psnr\"") != std::string::npos);
}
