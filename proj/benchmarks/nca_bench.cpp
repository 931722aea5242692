#include <benchmark/benchmark.h>

#include "nca/quantize.hpp"
#include "nca/sim.hpp"
#include "nca/train.hpp"

namespace {

using namespace nca;

void BM_GridStep(benchmark::State& state) {
    ShapeGrid shape = canonical_shapes()[4];
    ModelParams params = init_params(1);
    StateGrid grid = init_grid(shape);
    std::vector<bool> mask(active_cells(shape).size(), true);
    for (auto _ : state) {
        grid = grid_step(grid, params, mask);
        benchmark::DoNotOptimize(grid);
    }
}
BENCHMARK(BM_GridStep);

void BM_RolloutGradients(benchmark::State& state) {
    ShapeGrid shape = canonical_shapes()[4];
    ModelParams params = init_params(1);
    int t_steps = 20;
    std::vector<std::vector<bool>> masks(t_steps,
                                         std::vector<bool>(active_cells(shape).size(), true));
    for (auto _ : state) {
        RolloutTape tape = rollout_with_tape(shape, params, t_steps, masks);
        ParamGrads grads = gradients(tape, shape.label);
        benchmark::DoNotOptimize(grads);
    }
}
BENCHMARK(BM_RolloutGradients);

void BM_FirmwareRun(benchmark::State& state) {
    ShapeGrid shape = canonical_shapes()[4];
    ModelParams params = init_params(1);
    Quantizer q{-2.0, 2.0};
    SimClockConfig clock;
    for (auto _ : state) {
        RunReport report = firmware_run(shape, params, q, clock, 1);
        benchmark::DoNotOptimize(report);
    }
}
BENCHMARK(BM_FirmwareRun);

void BM_Listing1Run(benchmark::State& state) {
    ShapeGrid shape = canonical_shapes()[4];
    ModelParams params = init_params(1);
    for (auto _ : state) {
        RunReport report = listing1_validate(shape, params, 30, 1);
        benchmark::DoNotOptimize(report);
    }
}
BENCHMARK(BM_Listing1Run);

}  // namespace

BENCHMARK_MAIN();
