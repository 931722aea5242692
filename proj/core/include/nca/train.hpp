#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nca/model.hpp"

namespace nca {

struct TrainConfig {
    int iterations = 2500;
    int batch_size = 128;
    int t_min = 9;
    int t_max = 29;
    double drop_rate = 0.5;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t rng_seed = 0;
    bool clip_gradients = false;  // global-norm clip at 1.0, off by default
    int threads = 0;              // 0 = hardware concurrency
    bool log_progress = false;    // emit "iter=<n> loss=<f> T=<t>" lines
};

struct TrainReport {
    std::vector<double> losses;              // one per iteration
    std::vector<double> final_accuracy;      // per shape, all-cell agreement at 30 sync steps
    double wall_seconds = 0.0;
};

struct TrainDivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-step record of a rollout, enough to replay the forward pass and to run
// exact reverse-mode differentiation.
struct RolloutTape {
    ShapeGrid shape;
    const ModelParams* params = nullptr;
    std::vector<StateGrid> grids;               // grids[0] = init, grids[t] after step t
    std::vector<std::vector<bool>> masks;       // masks[t-1] drives step t
};

// Gradient holder mirroring ModelParams' tensor layout.
struct ParamGrads {
    ModelParams g;  // same shapes, used as storage
    void add_scaled(const ParamGrads& other, double scale);
    double global_norm() const;
};

// Squared-error loss: sum over active cells of ||logits - onehot(label)||^2.
double loss(const StateGrid& final_grid, int label);

RolloutTape rollout_with_tape(const ShapeGrid& shape, const ModelParams& params, int t_steps,
                              const std::vector<std::vector<bool>>& masks);

// Exact gradient of loss(final grid, label) w.r.t. every weight; the diagonal
// perceive taps stay zero.
ParamGrads gradients(const RolloutTape& tape, int label);

struct AdamState {
    ModelParams m;  // first moments, same layout
    ModelParams v;  // second moments
};

void adam_step(ModelParams& params, const ParamGrads& grad, AdamState& state,
               const TrainConfig& config, int iteration);

// Zero-mean init scaled by 1/sqrt(fan_in) for the first two layers (perceive
// fan-in counts only the 5 usable taps); output layer and biases zero, so the
// fresh network is the identity map.
ModelParams init_params(std::uint64_t rng_seed);

std::pair<ModelParams, TrainReport> train(const TrainConfig& config,
                                          const std::vector<ShapeGrid>& shapes);

// Convenience: does the model classify every active cell of `shape` correctly
// after `steps` synchronous full-mask steps?
bool classifies_all_cells(const ShapeGrid& shape, const ModelParams& params, int steps);

}  // namespace nca
