#include <benchmark/benchmark.h>
#include <omp.h>

#include "pathweight/models.hpp"
#include "pathweight/sde.hpp"

using namespace pathweight;

namespace {

struct OuCase {
    models::OuProblem problem = models::make_ou(2, 7);
    sde::TimeGrid grid{1.0, 1000};
    sde::ControlField u = problem.optimal_control(grid);
};

const OuCase& ou_case() {
    static const OuCase c;
    return c;
}

void BM_OuReference(benchmark::State& state) {
    const auto& c = ou_case();
    const auto k = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto batch = sde::simulate_controlled_reference(c.problem.model(), c.u, {}, c.problem.g(), c.grid,
                                                        sde::StoppingSpec::fixed(), k, 1);
        benchmark::DoNotOptimize(batch.log_girsanov.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}

void BM_OuKernel(benchmark::State& state) {
    const auto& c = ou_case();
    const auto k = static_cast<std::size_t>(state.range(0));
    omp_set_num_threads(static_cast<int>(state.range(1)));
    for (auto _ : state) {
        auto batch = sde::simulate_controlled(c.problem.model(), c.u, {}, c.problem.g(), c.grid,
                                              sde::StoppingSpec::fixed(), k, 1);
        benchmark::DoNotOptimize(batch.log_girsanov.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}

void BM_ExitKernel(benchmark::State& state) {
    omp_set_num_threads(static_cast<int>(state.range(1)));
    const auto k = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto batch = sde::brownian_exit_simulate(0.5, sde::HittingControl::perturbed,
                                                 sde::StoppingSpec::first_exit(-1.0, 1.0, 100.0), 1e-3, k, 1);
        benchmark::DoNotOptimize(batch.exit_time.data());
    }
}

}  // namespace

BENCHMARK(BM_OuReference)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OuKernel)->ArgsProduct({{2000}, {1, 2, 4}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ExitKernel)->ArgsProduct({{2000}, {1, 2, 4}})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
