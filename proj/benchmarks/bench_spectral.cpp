// Benchmarks for the hot path: padded FFTs, bispectrum accumulation, the
// triple-correlation estimator, and a full per-day estimation pass.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "proplab/calibration.hpp"
#include "proplab/spectral.hpp"
#include "proplab/synth.hpp"

using namespace proplab;

namespace {

std::vector<double> random_signs(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = coin(rng) ? 1.0 : -1.0;
    return v;
}

void BM_xcorr2(benchmark::State& state) {
    const std::size_t t_len = static_cast<std::size_t>(state.range(0));
    const auto f = random_signs(t_len, 1);
    const auto g = random_signs(t_len, 2);
    const int lag = static_cast<int>(t_len) / 2;
    for (auto _ : state) benchmark::DoNotOptimize(xcorr2(f, g, lag));
}
BENCHMARK(BM_xcorr2)->Arg(128)->Arg(1024)->Arg(8192);

void BM_bispectrum(benchmark::State& state) {
    const std::size_t p = static_cast<std::size_t>(state.range(0));
    const auto F = fft_padded(random_signs(p / 2, 3), p);
    for (auto _ : state) benchmark::DoNotOptimize(bispectrum(F, F, F));
}
BENCHMARK(BM_bispectrum)->Arg(96)->Arg(192)->Arg(384);

void BM_xcorr3(benchmark::State& state) {
    const int lag = static_cast<int>(state.range(0));
    const std::size_t t_len = 2 * static_cast<std::size_t>(lag);
    const auto f = random_signs(t_len, 4);
    const auto g = random_signs(t_len, 5);
    const auto h = random_signs(t_len, 6);
    for (auto _ : state) benchmark::DoNotOptimize(xcorr3(f, g, h, lag));
}
BENCHMARK(BM_xcorr3)->Arg(32)->Arg(64)->Arg(128);

void BM_xcorr3_day(benchmark::State& state) {
    const int lag = 64;
    const std::size_t day_len = static_cast<std::size_t>(state.range(0));
    const auto f = random_signs(day_len, 7);
    const auto g = random_signs(day_len, 8);
    const auto h = random_signs(day_len, 9);
    for (auto _ : state) benchmark::DoNotOptimize(xcorr3_day(f, g, h, lag));
}
BENCHMARK(BM_xcorr3_day)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);

void BM_estimate_day(benchmark::State& state) {
    FlowSpec spec;
    spec.events_per_day = static_cast<int>(state.range(0));
    spec.days = 1;
    spec.sign_memory = 0.6;
    spec.generator = make_cim2(0.01);
    spec.seed = 10;
    const auto data = generate(spec);
    EstimateOptions opt;
    opt.max_lag = 64;
    opt.need_triples = true;
    for (auto _ : state) benchmark::DoNotOptimize(estimate_by_day(data, opt));
}
BENCHMARK(BM_estimate_day)->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
