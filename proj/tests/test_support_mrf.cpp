#include <doctest.h>

#include "derain/support_mrf.hpp"
#include "support.hpp"

using namespace derain;
using derain::testing::random_frame;
using derain::testing::random_mask;

namespace {

SupportMask labeling(Shape g, unsigned bits) {
  SupportMask m(g);
  for (std::size_t i = 0; i < g.size(); ++i) m.set(i, (bits >> i) & 1u);
  return m;
}

double exhaustive_minimum(const PixelEnergy& e) {
  const Shape g = e.grid();
  double best = std::numeric_limits<double>::infinity();
  for (unsigned bits = 0; bits < (1u << g.size()); ++bits) best = std::min(best, energy_of(e, labeling(g, bits)));
  return best;
}

PixelEnergy random_energy(std::mt19937_64& rng, Shape g, double alpha, double beta) {
  const Frame x = random_frame(rng, g.height, g.width);
  const Frame b = random_frame(rng, g.height, g.width);
  const Frame f = random_frame(rng, g.height, g.width);
  const Frame r = random_frame(rng, g.height, g.width, -0.1, 0.1);
  const SupportMask prev = random_mask(rng, g.height, g.width, 0.3);
  return build_energy(x, b, f, r, 0.05, prev, alpha, beta);
}

}  // namespace

TEST_CASE("build_energy unaries and edges") {
  std::mt19937_64 rng(1);
  const Shape g{4, 5};
  const Frame x = random_frame(rng, 4, 5), b = random_frame(rng, 4, 5), f = random_frame(rng, 4, 5);
  const Frame r = random_frame(rng, 4, 5, -0.1, 0.1);
  const SupportMask prev = random_mask(rng, 4, 5);
  const double s2 = 0.02, alpha = 0.3, beta = 0.15;
  const PixelEnergy e = build_energy(x, b, f, r, s2, prev, alpha, beta);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double e0 = x[i] - b[i] - r[i];
    const double e1 = x[i] - f[i] - r[i];
    CHECK(e.cost0()[i] == doctest::Approx(e0 * e0 / (2 * s2) + alpha * prev[i]).epsilon(1e-14));
    CHECK(e.cost1()[i] == doctest::Approx(e1 * e1 / (2 * s2) + beta + alpha * (1 - prev[i])).epsilon(1e-14));
    CHECK(e.right()[i] == alpha);
    CHECK(e.down()[i] == alpha);
  }
  CHECK_THROWS(build_energy(x, b, f, r, 0.0, prev, alpha, beta));
  CHECK_THROWS_AS(build_energy(x, b, f, Frame(5, 4), s2, prev, alpha, beta), DimensionError);
}

TEST_CASE("X = B + R gives an empty mask") {
  std::mt19937_64 rng(2);
  const Frame b = random_frame(rng, 8, 8);
  const Frame r = random_frame(rng, 8, 8, -0.1, 0.1);
  const Frame f = random_frame(rng, 8, 8);
  const PixelEnergy e = build_energy(b + r, b, f, r, 0.01, SupportMask(8, 8), 0.3, 0.15);
  CHECK(min_cut_solve(e).count() == 0);
}

TEST_CASE("alpha = beta = 0 decouples the pixels") {
  std::mt19937_64 rng(3);
  const PixelEnergy e = random_energy(rng, {6, 7}, 0.0, 0.0);
  const SupportMask m = min_cut_solve(e);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i] == (e.cost1()[i] < e.cost0()[i] ? 1 : 0));
}

TEST_CASE("min-cut equals exhaustive enumeration on random 4x4 instances") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const PixelEnergy e = random_energy(rng, {4, 4}, 0.1, 0.05);
    CHECK(energy_of(e, min_cut_solve(e)) == exhaustive_minimum(e));
  }
  // uneven grids and non-uniform edges
  for (int trial = 0; trial < 20; ++trial) {
    const Shape g{3, 4};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> c0(g.size()), c1(g.size()), right(g.size()), down(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      c0[i] = u(rng);
      c1[i] = u(rng);
      right[i] = 0.5 * u(rng);
      down[i] = 0.5 * u(rng);
    }
    const PixelEnergy e(g, c0, c1, right, down);
    CHECK(energy_of(e, min_cut_solve(e)) == exhaustive_minimum(e));
  }
}

TEST_CASE("energy_of examples") {
  const Shape g{2, 2};
  const PixelEnergy e = PixelEnergy::uniform(g, {1, 2, 3, 4}, {5, 6, 7, 8}, 0.25);
  CHECK(energy_of(e, SupportMask(g, 0)) == 10.0);
  CHECK(energy_of(e, SupportMask(g, 1)) == 26.0);
  const SupportMask checker(2, 2, std::vector<std::uint8_t>{1, 0, 0, 1});
  CHECK(energy_of(e, checker) == doctest::Approx(5 + 2 + 3 + 8 + 4 * 0.25));
}

TEST_CASE("trivial labelings and tie-break") {
  const Shape g{5, 5};
  SUBCASE("huge label-1 cost") {
    const PixelEnergy e = PixelEnergy::uniform(g, std::vector<double>(25, 0.0), std::vector<double>(25, 1e9), 1.0);
    CHECK(min_cut_solve(e).count() == 0);
  }
  SUBCASE("label-symmetric energy prefers background") {
    const PixelEnergy e = PixelEnergy::uniform(g, std::vector<double>(25, 0.7), std::vector<double>(25, 0.7), 0.4);
    CHECK(min_cut_solve(e).count() == 0);
  }
  SUBCASE("negative weights are rejected") {
    CHECK_THROWS(PixelEnergy(g, std::vector<double>(25), std::vector<double>(25), std::vector<double>(25, -0.1),
                             std::vector<double>(25)));
    CHECK_THROWS(PixelEnergy::uniform(g, std::vector<double>(25), std::vector<double>(25), -1.0));
  }
}

TEST_CASE("raising beta never adds object pixels") {
  std::mt19937_64 rng(5);
  const Frame x = random_frame(rng, 12, 12), b = random_frame(rng, 12, 12), f = random_frame(rng, 12, 12);
  const Frame r(12, 12);
  const SupportMask prev = random_mask(rng, 12, 12);
  std::size_t last = std::numeric_limits<std::size_t>::max();
  for (double beta : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    const SupportMask m = min_cut_solve(build_energy(x, b, f, r, 0.02, prev, 0.3, beta));
    CHECK(m.count() <= last);
    last = m.count();
  }
}

TEST_CASE("min_cut_solve is deterministic and binary") {
  std::mt19937_64 rng(6);
  const PixelEnergy e = random_energy(rng, {20, 30}, 0.3, 0.15);
  const SupportMask a = min_cut_solve(e);
  const SupportMask b = min_cut_solve(e);
  CHECK(a == b);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] <= 1);
}

TEST_CASE("max-flow on a small graph") {
  MaxFlowGraph g(4);
  g.add_edge(0, 1, 3.0);
  g.add_edge(0, 2, 2.0);
  g.add_edge(1, 2, 1.0);
  g.add_edge(1, 3, 2.0);
  g.add_edge(2, 3, 3.0);
  CHECK(g.max_flow(0, 3) == doctest::Approx(5.0));
  const auto side = g.reaches_sink(3);
  CHECK(side[0] == 0);
  CHECK(side[3] == 1);
}
