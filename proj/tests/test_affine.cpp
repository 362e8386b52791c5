#include <doctest.h>

#include <numbers>

#include "derain/affine.hpp"
#include "derain/kernels.hpp"
#include "support.hpp"

using namespace derain;
using derain::testing::random_frame;
using derain::testing::smooth_image;

namespace {

double interior_max_error(const Frame& a, const Frame& b, int margin) {
  double err = 0.0;
  for (int y = margin; y < a.height() - margin; ++y)
    for (int x = margin; x < a.width() - margin; ++x) err = std::max(err, std::abs(a(y, x) - b(y, x)));
  return err;
}

// Brute-force horizontal translation minimizing the full-frame residual.
double grid_search_vx(const Frame& x, const Frame& b, double lo, double hi) {
  double best_v = lo, best = std::numeric_limits<double>::infinity();
  const SupportMask none(x.shape());
  const Frame zero(x.shape());
  for (double v = lo; v <= hi + 1e-12; v += 0.01) {
    const double r = alignment_residual(x, zero, b, AffineTransform::translation(v, 0.0), none);
    if (r < best) {
      best = r;
      best_v = v;
    }
  }
  return best_v;
}

}  // namespace

TEST_CASE("warp by the identity is exact") {
  std::mt19937_64 rng(1);
  const Frame img = random_frame(rng, 19, 23);
  CHECK(warp(img, AffineTransform::identity()) == img);
}

TEST_CASE("integer translation shifts indices") {
  std::mt19937_64 rng(2);
  const Frame img = random_frame(rng, 16, 20);
  const Frame out = warp(img, AffineTransform::translation(1.0, 0.0));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x + 1 < 20; ++x) CHECK(out(y, x) == img(y, x + 1));
  const Frame down = warp(img, AffineTransform::translation(0.0, -2.0));
  for (int y = 2; y < 16; ++y)
    for (int x = 0; x < 20; ++x) CHECK(down(y, x) == img(y - 2, x));
}

TEST_CASE("transform algebra") {
  const AffineTransform a({1.02, 0.03, -0.02, 0.98, 1.3, -0.7});
  const AffineTransform b = AffineTransform::rotation(0.1);
  const auto close = [](const AffineTransform& p, const AffineTransform& q) {
    for (std::size_t i = 0; i < 6; ++i)
      if (std::abs(p[i] - q[i]) > 1e-12) return false;
    return true;
  };
  CHECK(close(a.after(a.inverse()), AffineTransform::identity()));
  CHECK(close(a.inverse().after(a), AffineTransform::identity()));
  CHECK(close(b.inverse(), AffineTransform::rotation(-0.1)));

  // warp(warp(img, inner), outer) == warp(img, outer.after(inner)) at integer shifts
  std::mt19937_64 rng(3);
  const Frame img = random_frame(rng, 20, 20);
  const AffineTransform inner = AffineTransform::translation(2.0, 0.0);
  const AffineTransform outer = AffineTransform::translation(0.0, 3.0);
  CHECK(interior_max_error(warp(warp(img, inner), outer), warp(img, outer.after(inner)), 4) == 0.0);

  CHECK_THROWS(require_invertible(AffineTransform({0.05, 0.0, 0.0, 1.0, 0.0, 0.0})));
  CHECK_THROWS(warp(img, AffineTransform({1.0, 1.0, 1.0, 1.0, 0.0, 0.0})));
  CHECK_NOTHROW(require_invertible(b));
}

TEST_CASE("warp then inverse warp on a smooth image") {
  const Frame img = smooth_image(64, 64);
  const AffineTransform tau({1.02, 0.03, -0.02, 0.98, 1.3, -0.7});
  const Frame back = warp(warp(img, tau), tau.inverse());
  CHECK(interior_max_error(back, img, 6) <= 1e-2);
}

TEST_CASE("jacobian") {
  SUBCASE("constant image") {
    const WarpJacobian j = jacobian(Frame(16, 16, 0.4), AffineTransform({1.01, 0.0, 0.02, 0.99, 0.3, 0.1}));
    CHECK(j.rows.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("translation columns are the image gradients") {
    const Frame img = smooth_image(24, 28);
    Frame gx(img.shape()), gy(img.shape());
    kernels::serial::central_gradient(img.values(), 24, 28, gx.values(), gy.values());
    const WarpJacobian j = jacobian(img, AffineTransform::identity());
    for (std::size_t i = 0; i < img.size(); ++i) {
      CHECK(j.rows(static_cast<Eigen::Index>(i), 4) == gx[i]);
      CHECK(j.rows(static_cast<Eigen::Index>(i), 5) == gy[i]);
    }
  }
  SUBCASE("directional finite difference") {
    const AffineTransform tau({1.01, 0.02, -0.01, 0.995, 0.37, -0.21});
    Eigen::Matrix<double, 6, 1> dir;
    dir << 0.3, -0.2, 0.1, 0.25, 1.0, -0.8;
    dir *= 1e-3 / dir.norm();
    const auto relative_error = [&](const Frame& img) {
      const WarpJacobian j = jacobian(img, tau);
      const Frame diff = warp(img, tau.plus(dir)) - warp(img, tau);
      const Eigen::VectorXd pred = j.rows * dir;
      double num = 0.0, den = 0.0;
      for (int y = 4; y < img.height() - 4; ++y)
        for (int x = 4; x < img.width() - 4; ++x) {
          const auto i = static_cast<std::size_t>(y) * img.width() + x;
          num += std::pow(pred(static_cast<Eigen::Index>(i)) - diff[i], 2);
          den += diff[i] * diff[i];
        }
      return std::sqrt(num / den);
    };
    // a linear ramp is reproduced exactly by bilinear sampling and central differences
    Frame ramp(40, 40);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x) ramp(y, x) = 0.01 * x - 0.007 * y + 0.2;
    CHECK(relative_error(ramp) <= 1e-8);
    // on curved images the bilinear slope differs from the central difference
    // by a few percent, independent of the step size
    CHECK(relative_error(smooth_image(48, 48, 0.4)) <= 8e-2);
  }
}

TEST_CASE("delta_tau") {
  const Frame b = smooth_image(48, 48);
  const Frame zero(b.shape());
  const SupportMask none(b.shape());

  SUBCASE("zero residual gives a zero step") {
    const AffineTransform tau({1.01, 0.0, 0.0, 0.99, 0.4, -0.3});
    std::mt19937_64 rng(4);
    const Frame r = random_frame(rng, 48, 48, -0.05, 0.05);
    const StepResult s = delta_tau(warp(b, tau) + r, r, b, tau, none);
    CHECK(s.delta.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(s.warning.empty());
  }
  SUBCASE("half-pixel translation against a grid-search oracle") {
    const Frame x = warp(b, AffineTransform::translation(0.5, 0.0));
    const StepResult s = delta_tau(x, zero, b, AffineTransform::identity(), none);
    const double oracle = grid_search_vx(x, b, -1.0, 1.0);
    CHECK(std::abs(s.delta(4) - oracle) <= 0.1);
    CHECK(std::abs(s.delta(5)) <= 0.1);
  }
  SUBCASE("all-one mask has no data") {
    const StepResult s = delta_tau(warp(b, AffineTransform::translation(0.5, 0.0)), zero, b,
                                   AffineTransform::identity(), SupportMask(b.shape(), 1));
    CHECK(s.delta.isZero());
    CHECK_FALSE(s.warning.empty());
  }
  SUBCASE("constant offsets cancel") {
    const Frame x = warp(b, AffineTransform({1.01, 0.01, 0.0, 1.0, 0.6, -0.4}));
    std::mt19937_64 rng(5);
    const SupportMask m = derain::testing::random_mask(rng, 48, 48, 0.2);
    const StepResult s1 = delta_tau(x, zero, b, AffineTransform::identity(), m);
    const StepResult s2 = delta_tau(x + Frame(b.shape(), 0.3), zero, b + Frame(b.shape(), 0.3),
                                    AffineTransform::identity(), m);
    CHECK((s1.delta - s2.delta).norm() <= 1e-9 * s1.delta.norm());
  }
}

TEST_CASE("damped Gauss-Newton never increases the residual") {
  const Frame b = smooth_image(48, 48, 1.1);
  const Frame zero(b.shape());
  std::mt19937_64 rng(6);
  const SupportMask m = derain::testing::random_mask(rng, 48, 48, 0.1);
  const Frame x = warp(b, AffineTransform({0.99, 0.02, -0.015, 1.01, 1.4, -0.9}));
  AffineTransform tau;
  double res = alignment_residual(x, zero, b, tau, m);
  const double start = res;
  for (int it = 0; it < 10; ++it) {
    const StepResult s = delta_tau(x, zero, b, tau, m);
    const DampedStep d = damped_update(x, zero, b, tau, m, s.delta, res);
    CHECK(d.residual <= res);
    if (!d.accepted) CHECK(d.tau == tau);
    tau = d.tau;
    res = d.residual;
  }
  CHECK(res < 1e-2 * start);

  // a step that only makes things worse is rejected
  Eigen::Matrix<double, 6, 1> bad = Eigen::Matrix<double, 6, 1>::Zero();
  bad(4) = 50.0;
  const DampedStep d = damped_update(x, zero, b, tau, m, bad, res);
  CHECK_FALSE(d.accepted);
  CHECK(d.tau == tau);
  CHECK(d.residual == res);
}

TEST_CASE("align_to_reference") {
  const Frame ref = smooth_image(64, 64, 0.7);
  SUBCASE("same frame") {
    const Alignment a = align_to_reference(ref, ref);
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(a.tau[i] - AffineTransform::identity()[i]) <= 1e-8);
  }
  SUBCASE("two-pixel translation") {
    const Frame frame = warp(ref, AffineTransform::translation(2.0, -1.0));
    const Alignment a = align_to_reference(frame, ref);
    CHECK(std::abs(a.tau[4] + 2.0) <= 0.1);
    CHECK(std::abs(a.tau[5] - 1.0) <= 0.1);
    CHECK(interior_max_error(a.warped, ref, 6) <= 1e-2);
  }
  SUBCASE("one-degree rotation") {
    const double theta = std::numbers::pi / 180.0;
    const Frame frame = warp(ref, AffineTransform::rotation(theta));
    const Alignment a = align_to_reference(frame, ref);
    const AffineTransform expect = AffineTransform::rotation(-theta);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(a.tau[i] - expect[i]) <= 1e-2);
  }
}

TEST_CASE("downsample2") {
  const Frame f(3, 5, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
  const Frame d = downsample2(f);
  REQUIRE(d.shape() == Shape{1, 2});
  CHECK(d(0, 0) == 4.0);
  CHECK(d(0, 1) == 6.0);
}
