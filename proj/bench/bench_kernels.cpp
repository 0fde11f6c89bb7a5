// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "svc/kernels.hpp"
#include "svc/rng.hpp"

namespace {

using namespace svc::kernels;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  svc::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& e : v) e = rng.uniform(-1.0, 1.0);
  return v;
}

Conv1dGeom resblock_geom(std::size_t channels, std::size_t len) {
  Conv1dGeom g;
  g.in_channels = g.out_channels = channels;
  g.in_len = len;
  g.kernel = 7;
  g.dilation = 3;
  g.pad_left = 9;
  g.out_len = conv1d_out_len(len, 7, 1, 3, 9, 9);
  return g;
}

template <auto Fn>
void BM_ConvForward(benchmark::State& st) {
  const auto g = resblock_geom(static_cast<std::size_t>(st.range(0)),
                               static_cast<std::size_t>(st.range(1)));
  const auto x = random_vec(g.in_channels * g.in_len, 1);
  const auto w = random_vec(g.weight_size(), 2);
  const auto b = random_vec(g.out_channels, 3);
  std::vector<double> y(g.out_channels * g.out_len);
  for (auto _ : st) {
    Fn(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <auto Fn>
void BM_ConvBackwardInput(benchmark::State& st) {
  const auto g = resblock_geom(static_cast<std::size_t>(st.range(0)),
                               static_cast<std::size_t>(st.range(1)));
  const auto gy = random_vec(g.out_channels * g.out_len, 1);
  const auto w = random_vec(g.weight_size(), 2);
  std::vector<double> gx(g.in_channels * g.in_len);
  for (auto _ : st) {
    Fn(g, gy, w, gx);
    benchmark::DoNotOptimize(gx.data());
  }
}

template <auto Fn>
void BM_ConvBackwardWeight(benchmark::State& st) {
  const auto g = resblock_geom(static_cast<std::size_t>(st.range(0)),
                               static_cast<std::size_t>(st.range(1)));
  const auto gy = random_vec(g.out_channels * g.out_len, 1);
  const auto x = random_vec(g.in_channels * g.in_len, 2);
  std::vector<double> gw(g.weight_size()), gb(g.out_channels);
  for (auto _ : st) {
    Fn(g, gy, x, gw, gb);
    benchmark::DoNotOptimize(gw.data());
  }
}

template <auto Fn>
void BM_Yin(benchmark::State& st) {
  YinGeom g;
  g.hop = 120;
  g.frames = static_cast<std::size_t>(st.range(0));
  g.window = 960;
  g.max_lag = 480;
  g.first_start = -480;
  const auto x = random_vec(g.frames * g.hop, 4);
  std::vector<double> out(g.frames * (g.max_lag + 1));
  for (auto _ : st) {
    Fn(g, x, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<serial::conv1d_forward>)->Args({16, 640})->Args({64, 640});
BENCHMARK(BM_ConvForward<parallel::conv1d_forward>)->Args({16, 640})->Args({64, 640});
BENCHMARK(BM_ConvBackwardInput<serial::conv1d_backward_input>)->Args({16, 640})->Args({64, 640});
BENCHMARK(BM_ConvBackwardInput<parallel::conv1d_backward_input>)->Args({16, 640})->Args({64, 640});
BENCHMARK(BM_ConvBackwardWeight<serial::conv1d_backward_weight>)->Args({16, 640})->Args({64, 640});
BENCHMARK(BM_ConvBackwardWeight<parallel::conv1d_backward_weight>)->Args({16, 640})->Args({64, 640});
BENCHMARK(BM_Yin<serial::yin_difference>)->Arg(200);
BENCHMARK(BM_Yin<parallel::yin_difference>)->Arg(200);

BENCHMARK_MAIN();
