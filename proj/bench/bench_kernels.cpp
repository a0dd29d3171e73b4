// Serial reference vs OpenMP kernels on a case-sized forward model.

#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "plumeinv/forward_model.hpp"
#include "plumeinv/observation.hpp"
#include "plumeinv/uqprop.hpp"

using namespace plumeinv;

namespace {

ForwardModel make_model(int steps) {
    const TimeGrid g{0.0, 3600.0, steps};
    WindSeries w{g, {}, {}};
    for (int j = 0; j < steps; ++j) {
        const double th = 2.0 * M_PI * j / 96.0;
        w.ux.push_back(3.0 + 1.5 * std::cos(th));
        w.uy.push_back(-2.0 + 1.5 * std::sin(0.7 * th));
    }
    std::vector<SourceSite> sites;
    for (int i = 0; i < 7; ++i) sites.push_back({"q" + std::to_string(i), 100.0 * i - 300.0, 60.0 * (i % 3), 3.0 + i});
    return ForwardModel(sites, w, {9530.0, 5e-6, 0.005, 0.0026}, StabilityClass::D);
}

std::vector<Point3> points(int n) {
    std::vector<Point3> out;
    for (int k = 0; k < n; ++k) out.push_back({-2000.0 + 4000.0 * (k % 37) / 36.0, -2000.0 + 4000.0 * (k / 37) / 36.0, 0.0});
    return out;
}

std::vector<SensorSpec> sensors(double t0, int steps) {
    std::vector<SensorSpec> out;
    for (int k = 0; k < 30; ++k)
        out.push_back({"j" + std::to_string(k), {800.0 * std::cos(k * 0.21), 800.0 * std::sin(k * 0.21), 0.0},
                       DustfallJar{0.0095}, 10.0, ""});
    std::vector<double> hourly;
    for (int j = 0; j < steps; ++j) hourly.push_back(t0 + 3600.0 * j);
    out.push_back({"hourly", {900.0, -900.0, 0.0}, RealTimeSampler{hourly, 3600.0}, 100.0, ""});
    return out;
}

void BM_kernel_table(benchmark::State& state, bool parallel) {
    const auto model = make_model(static_cast<int>(state.range(0)));
    const auto pts = points(400);
    for (auto _ : state) {
        auto t = parallel ? kernels::kernel_table_parallel(model, pts) : kernels::kernel_table_serial(model, pts);
        benchmark::DoNotOptimize(t.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(pts.size()) * model.unknowns());
}

void BM_assemble_F(benchmark::State& state, Execution exec) {
    const int steps = static_cast<int>(state.range(0));
    const auto model = make_model(steps);
    const auto s = sensors(0.0, steps);
    for (auto _ : state) {
        auto F = assemble_F(s, model, exec);
        benchmark::DoNotOptimize(F.matrix.data());
    }
}

}  // namespace

BENCHMARK_CAPTURE(BM_kernel_table, serial, false)->Arg(96)->Arg(720)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_kernel_table, parallel, true)->Arg(96)->Arg(720)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_assemble_F, serial, Execution::serial)->Arg(96)->Arg(720)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_assemble_F, parallel, Execution::parallel)->Arg(96)->Arg(720)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
