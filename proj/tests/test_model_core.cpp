#include <doctest.h>

#include "derain/fft_conv.hpp"
#include "derain/frame.hpp"
#include "derain/kernels.hpp"
#include "support.hpp"

using namespace derain;
using derain::testing::direct_convolve;
using derain::testing::random_bank;
using derain::testing::random_frame;
using derain::testing::random_mask;

TEST_CASE("frame arithmetic and shape checks") {
  Frame a(2, 3, 1.0);
  Frame b(2, 3, 0.5);
  CHECK((a + b)[4] == 1.5);
  CHECK((a - b)[0] == 0.5);
  CHECK((2.0 * b)[5] == 1.0);
  CHECK(sum(a) == 6.0);
  CHECK_THROWS_AS(a + Frame(3, 2), DimensionError);
  CHECK_THROWS_AS(Frame(2, 2, std::vector<double>(3)), DimensionError);
  Frame c(2, 2);
  c[1] = std::nan("");
  CHECK_FALSE(c.all_finite());
}

TEST_CASE("support mask complement covers the grid") {
  std::mt19937_64 rng(1);
  const SupportMask m = random_mask(rng, 9, 7);
  const SupportMask c = m.complement();
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i] + c[i] == 1);
  CHECK(m.count() + c.count() == m.size());
}

TEST_CASE("filter bank validation") {
  Frame unit(3, 3);
  unit(1, 1) = 1.0;
  CHECK_NOTHROW(FilterBank({{3, 1}}, {unit}));
  CHECK_THROWS(FilterBank({{4, 1}}, {Frame(4, 4)}));
  CHECK_THROWS(FilterBank({{3, 1}, {3, 1}}, {unit, unit}));
  CHECK_THROWS(FilterBank({{3, 1}, {5, 1}}, {unit, Frame(5, 5)}));
  CHECK_THROWS(FilterBank({{3, 1}}, {unit * 1.01}));

  const FilterBank bank = make_streak_bank(default_scales());
  REQUIRE(bank.scale_count() == 3);
  CHECK(bank.scales()[0].patch_size == 13);
  CHECK(bank.scales()[1].patch_size == 9);
  CHECK(bank.scales()[2].patch_size == 3);
  for (const Frame& f : bank.filters()) CHECK(frobenius_norm(f) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("convolve_sum examples") {
  std::mt19937_64 rng(2);
  const Frame m = random_frame(rng, 16, 16, -1.0, 1.0);

  SUBCASE("1x1 identity kernel") {
    const FilterBank bank({{1, 1}}, {Frame(1, 1, 1.0)});
    CHECK(max_abs_difference(convolve_sum(bank, {m}), m) < 1e-14);
  }
  SUBCASE("zero maps give a zero frame") {
    const FilterBank bank = make_streak_bank(default_scales());
    const Frame r = convolve_sum(bank, zero_maps(bank, {16, 16}));
    CHECK(sum_abs(r) == 0.0);
  }
  SUBCASE("random 3x3 against direct circular convolution") {
    const FilterBank bank = random_bank(rng, {{3, 1}});
    CHECK(max_abs_difference(convolve_sum(bank, {m}), direct_convolve(bank.filter(0), m)) <= 1e-8);
  }
  SUBCASE("mismatched map size is rejected") {
    const FilterBank bank = random_bank(rng, {{3, 2}});
    CHECK_THROWS_AS(convolve_sum(bank, {m, Frame(16, 17)}), DimensionError);
    CHECK_THROWS_AS(convolve_sum(bank, {m}), DimensionError);
  }
}

TEST_CASE("FFT convolution matches the direct oracle at every default scale") {
  std::mt19937_64 rng(3);
  for (const Shape g : {Shape{16, 16}, Shape{17, 23}, Shape{24, 20}}) {
    const FilterBank bank = random_bank(rng, default_scales());
    FeatureMapSet maps;
    for (std::size_t i = 0; i < bank.filter_count(); ++i) maps.push_back(random_frame(rng, g.height, g.width, -1, 1));
    Frame direct(g);
    for (std::size_t i = 0; i < bank.filter_count(); ++i) {
      const Frame single = direct_convolve(bank.filter(i), maps[i]);
      CHECK(max_abs_difference(convolve(bank.filter(i), maps[i]), single) <= 1e-8);
      direct += single;
    }
    CHECK(max_abs_difference(convolve_sum(bank, maps), direct) <= 1e-8);
    Frame per_scale(g);
    for (const Frame& layer : convolve_per_scale(bank, maps)) per_scale += layer;
    CHECK(max_abs_difference(per_scale, direct) <= 1e-8);
  }
}

TEST_CASE("convolve_sum is linear in the maps") {
  std::mt19937_64 rng(4);
  const FilterBank bank = random_bank(rng, default_scales());
  FeatureMapSet m1, m2, mix;
  const double a = 0.7, b = -1.3;
  for (std::size_t i = 0; i < bank.filter_count(); ++i) {
    m1.push_back(random_frame(rng, 16, 16, -1, 1));
    m2.push_back(random_frame(rng, 16, 16, -1, 1));
    mix.push_back(a * m1.back() + b * m2.back());
  }
  const Frame lhs = convolve_sum(bank, mix);
  const Frame rhs = a * convolve_sum(bank, m1) + b * convolve_sum(bank, m2);
  CHECK(max_abs_difference(lhs, rhs) <= 1e-10);
}

TEST_CASE("FFT round trip and cross-correlation") {
  std::mt19937_64 rng(5);
  const Frame f = random_frame(rng, 16, 21);
  CHECK(max_abs_difference(inverse_fft(forward_fft(f)), f) < 1e-13);

  const Frame a = random_frame(rng, 16, 16, -1, 1);
  const Frame b = random_frame(rng, 16, 16, -1, 1);
  const Frame c = circular_cross_correlation(a, b);
  for (int dy : {0, 3, 15})
    for (int dx : {0, 1, 9}) {
      double acc = 0.0;
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) acc += a(y, x) * b((y + dy) % 16, (x + dx) % 16);
      CHECK(c(dy, dx) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("elementwise_compose") {
  std::mt19937_64 rng(6);
  const Frame x = random_frame(rng, 16, 16);
  const Frame b = random_frame(rng, 16, 16);
  const Frame f = random_frame(rng, 16, 16);
  const Frame r = random_frame(rng, 16, 16, -0.2, 0.2);

  CHECK(elementwise_compose(x, b, f, r, SupportMask(16, 16, 0)) == b + r);
  CHECK(elementwise_compose(x, b, f, r, SupportMask(16, 16, 1)) == f + r);

  const SupportMask h = random_mask(rng, 16, 16);
  const Frame pred = elementwise_compose(x, b, f, r, h);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(pred[i] == (h[i] ? f[i] : b[i]) + r[i]);
  CHECK(recover(b, f, h) + r == pred);

  SUBCASE("X equal to the composition leaves a zero residual") {
    const Frame e = pred - elementwise_compose(pred, b, f, r, h);
    CHECK(sum_abs(e) == 0.0);
  }
  SUBCASE("mismatched shapes") { CHECK_THROWS_AS(elementwise_compose(x, b, f, Frame(16, 15), h), DimensionError); }
}

TEST_CASE("reconstruction identity holds bit for bit on representable inputs") {
  // Values on a 2^-10 grid keep every sum and difference exact.
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> q(0, 1024);
  auto grid_frame = [&] {
    Frame fr(16, 16);
    for (double& v : fr.values()) v = q(rng) / 1024.0;
    return fr;
  };
  const Frame x = grid_frame(), b = grid_frame(), f = grid_frame(), r = grid_frame();
  const SupportMask h = random_mask(rng, 16, 16);
  const Frame pred = elementwise_compose(x, b, f, r, h);
  const Frame e = x - pred;
  CHECK(pred + e == x);
}

TEST_CASE("parallel kernels agree with the serial reference") {
  std::mt19937_64 rng(8);
  const int h = 37, w = 53;
  const Frame a = random_frame(rng, h, w, -1, 1);
  const Frame b = random_frame(rng, h, w, -1, 1);
  const Frame c = random_frame(rng, h, w, -1, 1);
  const SupportMask m = random_mask(rng, h, w);
  Frame o1(h, w), o2(h, w), p1(h, w), p2(h, w);

  kernels::compose(m.labels(), a.values(), b.values(), c.values(), o1.values());
  kernels::serial::compose(m.labels(), a.values(), b.values(), c.values(), o2.values());
  CHECK(o1 == o2);
  kernels::soft_threshold(a.values(), 0.3, o1.values());
  kernels::serial::soft_threshold(a.values(), 0.3, o2.values());
  CHECK(o1 == o2);
  kernels::axpby(0.3, a.values(), -2.0, b.values(), o1.values());
  kernels::serial::axpby(0.3, a.values(), -2.0, b.values(), o2.values());
  CHECK(o1 == o2);
  CHECK(kernels::sum(a.values()) == doctest::Approx(kernels::serial::sum(a.values())).epsilon(1e-13));
  CHECK(kernels::dot(a.values(), b.values()) ==
        doctest::Approx(kernels::serial::dot(a.values(), b.values())).epsilon(1e-13));
  CHECK(kernels::tv_norm(a.values(), h, w) == doctest::Approx(kernels::serial::tv_norm(a.values(), h, w)));
  kernels::forward_gradient(a.values(), h, w, o1.values(), p1.values());
  kernels::serial::forward_gradient(a.values(), h, w, o2.values(), p2.values());
  CHECK(o1 == o2);
  CHECK(p1 == p2);
  kernels::divergence(a.values(), b.values(), h, w, o1.values());
  kernels::serial::divergence(a.values(), b.values(), h, w, o2.values());
  CHECK(o1 == o2);
  kernels::central_gradient(a.values(), h, w, o1.values(), p1.values());
  kernels::serial::central_gradient(a.values(), h, w, o2.values(), p2.values());
  CHECK(o1 == o2);
  CHECK(p1 == p2);
  const kernels::AffineParams tau{1.01, 0.02, -0.015, 0.99, 0.4, -1.2};
  kernels::warp_bilinear(a.values(), h, w, tau, o1.values());
  kernels::serial::warp_bilinear(a.values(), h, w, tau, o2.values());
  CHECK(o1 == o2);
}

TEST_CASE("divergence is the negative adjoint of the forward gradient") {
  std::mt19937_64 rng(9);
  const int h = 11, w = 14;
  const Frame f = random_frame(rng, h, w, -1, 1);
  const Frame px = random_frame(rng, h, w, -1, 1);
  const Frame py = random_frame(rng, h, w, -1, 1);
  Frame gx(h, w), gy(h, w), div(h, w);
  kernels::serial::forward_gradient(f.values(), h, w, gx.values(), gy.values());
  kernels::serial::divergence(px.values(), py.values(), h, w, div.values());
  CHECK(dot(gx, px) + dot(gy, py) == doctest::Approx(-dot(f, div)).epsilon(1e-12));
}
