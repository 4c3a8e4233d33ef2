#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "cusp/dynamics.hpp"
#include "cusp/rng.hpp"
#include "cusp/stats.hpp"

namespace {

void BM_PhiloxNormal2(benchmark::State& state)
{
    const cusp::rng::Stream stream(cusp::rng::StreamKey(7), 0);
    std::uint64_t k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(stream.normal2(k++));
    }
}
BENCHMARK(BM_PhiloxNormal2);

// one reflected Euler step near the boundary of the 45 degree benchmark
void BM_ReflectedStep(benchmark::State& state)
{
    const auto d = cusp::make_power_cusp(2.0, 2.0, 0.1);
    const auto f = cusp::constant_angle_field(d, -M_PI / 4, M_PI / 4);
    const auto c = cusp::constant_coefficients(cusp::Vec2::Zero(), cusp::Mat2::Identity());
    const cusp::rng::Stream stream(cusp::rng::StreamKey(11), 0);
    const double x1 = 0.01;
    const cusp::Vec2 x(x1, d.upper(x1) - 1e-3 * d.width(x1));
    const double dt = cusp::adaptive_dt(d, x, 1e-4, 0.1, 1e-14);
    std::uint64_t k = 0;
    for (auto _ : state) {
        const cusp::Vec2 noise = std::sqrt(dt) * stream.normal2(k++);
        benchmark::DoNotOptimize(cusp::reflected_euler_step(d, f, c, x, dt, noise));
    }
}
BENCHMARK(BM_ReflectedStep);

void BM_ExitPath(benchmark::State& state)
{
    const auto d = cusp::make_power_cusp(2.0, 2.0, 0.1);
    const auto f = cusp::constant_angle_field(d, -M_PI / 4, M_PI / 4);
    const auto c = cusp::constant_coefficients(cusp::Vec2::Zero(), cusp::Mat2::Identity());
    const double level = 0.0125;
    cusp::SimOptions opt;
    opt.record_full = false;
    std::uint64_t seed = 0;
    std::uint64_t steps = 0;
    for (auto _ : state) {
        const auto rec = cusp::simulate(d, f, c, cusp::Vec2(1e-3 * level, 0.0), cusp::StoppingRule::exit_at(level),
                                        seed++, opt);
        steps += rec.summary.steps;
    }
    state.counters["steps_per_path"] =
        benchmark::Counter(static_cast<double>(steps), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_ExitPath)->Unit(benchmark::kMillisecond);

void BM_KsDistance(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const cusp::rng::Stream stream(cusp::rng::StreamKey(3), 0);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = stream.normal2(i);
        a[i] = v.x();
        b[i] = v.y();
    }
    const cusp::EmpiricalDistribution ea(a), eb(b);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cusp::ks_distance(ea, eb));
    }
}
BENCHMARK(BM_KsDistance)->Arg(1 << 10)->Arg(1 << 14);

}  // namespace
BENCHMARK_MAIN();
