// Serial reference vs OpenMP kernels on frame-sized buffers.
//
//   bench_kernels --benchmark_filter=warp

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "derain/kernels.hpp"

namespace k = derain::kernels;

namespace {

struct Buffers {
  int height, width;
  std::vector<double> a, b, c, out, out2;
  std::vector<std::uint8_t> h;

  explicit Buffers(int side) : height(side), width(side) {
    const std::size_t n = static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto* v : {&a, &b, &c}) {
      v->resize(n);
      for (double& x : *v) x = u(rng);
    }
    out.assign(n, 0.0);
    out2.assign(n, 0.0);
    h.resize(n);
    for (auto& x : h) x = static_cast<std::uint8_t>(rng() & 1u);
  }
  std::size_t size() const { return a.size(); }
};

void set_counters(benchmark::State& state, const Buffers& buf) {
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * static_cast<std::int64_t>(buf.size()));
}

template <bool Parallel>
void BM_compose(benchmark::State& state) {
  Buffers buf(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) k::compose(buf.h, buf.a, buf.b, buf.c, buf.out);
    else k::serial::compose(buf.h, buf.a, buf.b, buf.c, buf.out);
    benchmark::DoNotOptimize(buf.out.data());
  }
  set_counters(state, buf);
}

template <bool Parallel>
void BM_soft_threshold(benchmark::State& state) {
  Buffers buf(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) k::soft_threshold(buf.a, 0.3, buf.out);
    else k::serial::soft_threshold(buf.a, 0.3, buf.out);
    benchmark::DoNotOptimize(buf.out.data());
  }
  set_counters(state, buf);
}

template <bool Parallel>
void BM_axpby(benchmark::State& state) {
  Buffers buf(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) k::axpby(0.5, buf.a, -2.0, buf.b, buf.out);
    else k::serial::axpby(0.5, buf.a, -2.0, buf.b, buf.out);
    benchmark::DoNotOptimize(buf.out.data());
  }
  set_counters(state, buf);
}

template <bool Parallel>
void BM_dot(benchmark::State& state) {
  Buffers buf(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    double v = Parallel ? k::dot(buf.a, buf.b) : k::serial::dot(buf.a, buf.b);
    benchmark::DoNotOptimize(v);
  }
  set_counters(state, buf);
}

template <bool Parallel>
void BM_sum_abs(benchmark::State& state) {
  Buffers buf(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    double v = Parallel ? k::sum_abs(buf.a) : k::serial::sum_abs(buf.a);
    benchmark::DoNotOptimize(v);
  }
  set_counters(state, buf);
}

template <bool Parallel>
void BM_tv_norm(benchmark::State& state) {
  Buffers buf(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    double v = Parallel ? k::tv_norm(buf.a, buf.height, buf.width) : k::serial::tv_norm(buf.a, buf.height, buf.width);
    benchmark::DoNotOptimize(v);
  }
  set_counters(state, buf);
}

template <bool Parallel>
void BM_gradient_divergence(benchmark::State& state) {
  Buffers buf(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::forward_gradient(buf.a, buf.height, buf.width, buf.out, buf.out2);
      k::divergence(buf.out, buf.out2, buf.height, buf.width, buf.c);
    } else {
      k::serial::forward_gradient(buf.a, buf.height, buf.width, buf.out, buf.out2);
      k::serial::divergence(buf.out, buf.out2, buf.height, buf.width, buf.c);
    }
    benchmark::DoNotOptimize(buf.c.data());
  }
  set_counters(state, buf);
}

template <bool Parallel>
void BM_central_gradient(benchmark::State& state) {
  Buffers buf(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) k::central_gradient(buf.a, buf.height, buf.width, buf.out, buf.out2);
    else k::serial::central_gradient(buf.a, buf.height, buf.width, buf.out, buf.out2);
    benchmark::DoNotOptimize(buf.out.data());
  }
  set_counters(state, buf);
}

template <bool Parallel>
void BM_warp_bilinear(benchmark::State& state) {
  Buffers buf(static_cast<int>(state.range(0)));
  const k::AffineParams tau{0.9998, -0.0175, 0.0175, 0.9998, 1.3, -0.7};
  for (auto _ : state) {
    if constexpr (Parallel) k::warp_bilinear(buf.a, buf.height, buf.width, tau, buf.out);
    else k::serial::warp_bilinear(buf.a, buf.height, buf.width, tau, buf.out);
    benchmark::DoNotOptimize(buf.out.data());
  }
  set_counters(state, buf);
}

}  // namespace

#define DERAIN_BENCH_PAIR(fn)                                                   \
  BENCHMARK(fn<false>)->Name(#fn "/serial")->Arg(128)->Arg(512)->Arg(1024);     \
  BENCHMARK(fn<true>)->Name(#fn "/openmp")->Arg(128)->Arg(512)->Arg(1024)->UseRealTime();

DERAIN_BENCH_PAIR(BM_compose)
DERAIN_BENCH_PAIR(BM_soft_threshold)
DERAIN_BENCH_PAIR(BM_axpby)
DERAIN_BENCH_PAIR(BM_dot)
DERAIN_BENCH_PAIR(BM_sum_abs)
DERAIN_BENCH_PAIR(BM_tv_norm)
DERAIN_BENCH_PAIR(BM_gradient_divergence)
DERAIN_BENCH_PAIR(BM_central_gradient)
DERAIN_BENCH_PAIR(BM_warp_bilinear)

BENCHMARK_MAIN();
