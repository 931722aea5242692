#include "nca/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "nca/rng.hpp"

namespace nca {
namespace {

// Forward pass for one cell keeping the post-ReLU activations and gates, the
// pieces the backward sweep needs.
struct CellForward {
    std::array<double, kHiddenChannels> h1{};  // after perceive + ReLU
    std::array<double, kHiddenChannels> h2{};  // after hidden 1x1 + ReLU
    std::array<bool, kHiddenChannels> gate1{};
    std::array<bool, kHiddenChannels> gate2{};
};

struct TapInputs {
    std::array<int, 5> tap;
    std::array<CellState, 5> state;
};

TapInputs gather_taps(const StateGrid& grid, int x, int y) {
    TapInputs in;
    in.tap = {kTapCenter, kTapNorth, kTapEast, kTapSouth, kTapWest};
    in.state = {grid.at(x, y), grid.neighbor(x, y - 1), grid.neighbor(x + 1, y),
                grid.neighbor(x, y + 1), grid.neighbor(x - 1, y)};
    return in;
}

CellForward cell_forward(const TapInputs& in, const ModelParams& params) {
    CellForward f;
    std::array<double, kHiddenChannels> z;
    for (int o = 0; o < kHiddenChannels; ++o) z[o] = params.perceive_bias[o];
    for (int t = 0; t < 5; ++t) {
        const double* k =
            &params.perceive_kernel[static_cast<std::size_t>(in.tap[t]) * kStateChannels * kHiddenChannels];
        for (int c = 0; c < kStateChannels; ++c) {
            double v = in.state[t][c];
            if (v == 0.0) continue;
            const double* row = k + static_cast<std::size_t>(c) * kHiddenChannels;
            for (int o = 0; o < kHiddenChannels; ++o) z[o] += v * row[o];
        }
    }
    for (int o = 0; o < kHiddenChannels; ++o) {
        f.gate1[o] = z[o] > 0.0;
        f.h1[o] = f.gate1[o] ? z[o] : 0.0;
    }

    for (int o = 0; o < kHiddenChannels; ++o) z[o] = params.hidden_bias[o];
    for (int i = 0; i < kHiddenChannels; ++i) {
        double v = f.h1[i];
        if (v == 0.0) continue;
        const double* row = &params.hidden_kernel[static_cast<std::size_t>(i) * kHiddenChannels];
        for (int o = 0; o < kHiddenChannels; ++o) z[o] += v * row[o];
    }
    for (int o = 0; o < kHiddenChannels; ++o) {
        f.gate2[o] = z[o] > 0.0;
        f.h2[o] = f.gate2[o] ? z[o] : 0.0;
    }
    return f;
}

}  // namespace

void ParamGrads::add_scaled(const ParamGrads& other, double scale) {
    auto dst = g.tensors();
    auto src = other.g.tensors();
    for (int t = 0; t < 6; ++t)
        for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += scale * src[t][i];
}

double ParamGrads::global_norm() const {
    double sq = 0.0;
    for (auto t : g.tensors())
        for (double v : t) sq += v * v;
    return std::sqrt(sq);
}

double loss(const StateGrid& final_grid, int label) {
    double total = 0.0;
    for (auto [x, y] : active_cells(final_grid.shape)) {
        const CellState& s = final_grid.at(x, y);
        for (int c = 0; c < kNumClasses; ++c) {
            double d = s[kLogitOffset + c] - (c == label ? 1.0 : 0.0);
            total += d * d;
        }
    }
    return total;
}

RolloutTape rollout_with_tape(const ShapeGrid& shape, const ModelParams& params, int t_steps,
                              const std::vector<std::vector<bool>>& masks) {
    RolloutTape tape;
    tape.shape = shape;
    tape.params = &params;
    tape.masks = masks;
    tape.grids.reserve(t_steps + 1);
    tape.grids.push_back(init_grid(shape));
    for (int t = 0; t < t_steps; ++t)
        tape.grids.push_back(grid_step(tape.grids.back(), params, masks[t]));
    return tape;
}

ParamGrads gradients(const RolloutTape& tape, int label) {
    const ModelParams& params = *tape.params;
    const ShapeGrid& shape = tape.shape;
    auto cells = active_cells(shape);
    ParamGrads grads;

    // dL/ds at the final step, nonzero only on active cells' logit channels
    std::vector<CellState> ds(shape.mask.size(), zero_state());
    const StateGrid& last = tape.grids.back();
    for (auto [x, y] : cells) {
        const CellState& s = last.at(x, y);
        CellState& d = ds[static_cast<std::size_t>(y) * shape.width + x];
        for (int c = 0; c < kNumClasses; ++c)
            d[kLogitOffset + c] = 2.0 * (s[kLogitOffset + c] - (c == label ? 1.0 : 0.0));
    }

    auto pos_index = [&](int x, int y) { return static_cast<std::size_t>(y) * shape.width + x; };

    for (int t = static_cast<int>(tape.masks.size()); t >= 1; --t) {
        const StateGrid& prev = tape.grids[t - 1];
        const std::vector<bool>& mask = tape.masks[t - 1];
        // identity path s^t = s^{t-1} + ...
        std::vector<CellState> dprev = ds;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (!mask[i]) continue;
            auto [x, y] = cells[i];
            const CellState& g_out = ds[pos_index(x, y)];
            TapInputs in = gather_taps(prev, x, y);
            CellForward f = cell_forward(in, params);

            // output layer
            std::array<double, kHiddenChannels> g_h2{};
            for (int i40 = 0; i40 < kHiddenChannels; ++i40) {
                double* krow = &grads.g.out_kernel[static_cast<std::size_t>(i40) * kStateChannels];
                const double* wrow = &params.out_kernel[static_cast<std::size_t>(i40) * kStateChannels];
                double h = f.h2[i40];
                double acc = 0.0;
                for (int o = 0; o < kStateChannels; ++o) {
                    krow[o] += h * g_out[o];
                    acc += wrow[o] * g_out[o];
                }
                g_h2[i40] = acc;
            }
            for (int o = 0; o < kStateChannels; ++o) grads.g.out_bias[o] += g_out[o];

            // hidden layer (through its ReLU gate)
            std::array<double, kHiddenChannels> g_z2;
            for (int o = 0; o < kHiddenChannels; ++o) g_z2[o] = f.gate2[o] ? g_h2[o] : 0.0;
            std::array<double, kHiddenChannels> g_h1{};
            for (int i40 = 0; i40 < kHiddenChannels; ++i40) {
                double* krow = &grads.g.hidden_kernel[static_cast<std::size_t>(i40) * kHiddenChannels];
                const double* wrow = &params.hidden_kernel[static_cast<std::size_t>(i40) * kHiddenChannels];
                double h = f.h1[i40];
                double acc = 0.0;
                for (int o = 0; o < kHiddenChannels; ++o) {
                    krow[o] += h * g_z2[o];
                    acc += wrow[o] * g_z2[o];
                }
                g_h1[i40] = acc;
            }
            for (int o = 0; o < kHiddenChannels; ++o) grads.g.hidden_bias[o] += g_z2[o];

            // perceive layer (through its ReLU gate), scattering input grads to
            // the neighbor positions; grads into empty/out-of-grid positions
            // vanish because those states are clamped to zero
            std::array<double, kHiddenChannels> g_z1;
            for (int o = 0; o < kHiddenChannels; ++o) g_z1[o] = f.gate1[o] ? g_h1[o] : 0.0;
            for (int o = 0; o < kHiddenChannels; ++o) grads.g.perceive_bias[o] += g_z1[o];

            const std::array<std::pair<int, int>, 5> tap_pos = {{
                {x, y}, {x, y - 1}, {x + 1, y}, {x, y + 1}, {x - 1, y},
            }};
            for (int ti = 0; ti < 5; ++ti) {
                int tap = in.tap[ti];
                double* kgrad =
                    &grads.g.perceive_kernel[static_cast<std::size_t>(tap) * kStateChannels * kHiddenChannels];
                const double* kw =
                    &params.perceive_kernel[static_cast<std::size_t>(tap) * kStateChannels * kHiddenChannels];
                auto [nx, ny] = tap_pos[ti];
                bool scatter = shape.active(nx, ny);
                CellState* dtarget = scatter ? &dprev[pos_index(nx, ny)] : nullptr;
                for (int c = 0; c < kStateChannels; ++c) {
                    double v = in.state[ti][c];
                    double* krow = kgrad + static_cast<std::size_t>(c) * kHiddenChannels;
                    const double* wrow = kw + static_cast<std::size_t>(c) * kHiddenChannels;
                    double acc = 0.0;
                    for (int o = 0; o < kHiddenChannels; ++o) {
                        krow[o] += v * g_z1[o];
                        acc += wrow[o] * g_z1[o];
                    }
                    if (dtarget) (*dtarget)[c] += acc;
                }
            }
        }
        ds = std::move(dprev);
    }

    grads.g.clamp_corners();
    return grads;
}

void adam_step(ModelParams& params, const ParamGrads& grad, AdamState& state,
               const TrainConfig& config, int iteration) {
    double bc1 = 1.0 - std::pow(config.beta1, iteration);
    double bc2 = 1.0 - std::pow(config.beta2, iteration);
    auto p = params.tensors();
    auto g = grad.g.tensors();
    auto m = state.m.tensors();
    auto v = state.v.tensors();
    for (int t = 0; t < 6; ++t) {
        for (std::size_t i = 0; i < p[t].size(); ++i) {
            double gi = g[t][i];
            m[t][i] = config.beta1 * m[t][i] + (1.0 - config.beta1) * gi;
            v[t][i] = config.beta2 * v[t][i] + (1.0 - config.beta2) * gi * gi;
            double m_hat = m[t][i] / bc1;
            double v_hat = v[t][i] / bc2;
            p[t][i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
    params.clamp_corners();
}

ModelParams init_params(std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    ModelParams params;
    // 5 usable taps x 21 channels feed each perceive output
    double perceive_scale = 1.0 / std::sqrt(5.0 * kStateChannels);
    for (int tap : {kTapCenter, kTapNorth, kTapEast, kTapSouth, kTapWest})
        for (int in = 0; in < kStateChannels; ++in)
            for (int out = 0; out < kHiddenChannels; ++out)
                params.perceive_at(tap, in, out) = perceive_scale * rng.normal();
    double hidden_scale = 1.0 / std::sqrt(static_cast<double>(kHiddenChannels));
    for (double& w : params.hidden_kernel) w = hidden_scale * rng.normal();
    // output layer and all biases stay zero: the untrained NCA is the identity
    return params;
}

bool classifies_all_cells(const ShapeGrid& shape, const ModelParams& params, int steps) {
    StateGrid grid = init_grid(shape);
    std::vector<bool> full_mask(active_cells(shape).size(), true);
    for (int t = 0; t < steps; ++t) grid = grid_step(grid, params, full_mask);
    for (auto [x, y] : active_cells(shape))
        if (classify(grid.at(x, y)) != shape.label) return false;
    return true;
}

std::pair<ModelParams, TrainReport> train(const TrainConfig& config,
                                          const std::vector<ShapeGrid>& shapes) {
    if (shapes.empty()) throw std::invalid_argument("train: shape list is empty");
    auto start = std::chrono::steady_clock::now();

    Rng master(config.rng_seed);
    ModelParams params = init_params(master.next_u64());
    AdamState adam;
    TrainReport report;
    report.losses.reserve(config.iterations);

    int n_threads = config.threads > 0 ? config.threads
                                       : std::max(1u, std::thread::hardware_concurrency());

    struct Element {
        int shape_index;
        std::vector<std::vector<bool>> masks;
        double loss_value = 0.0;
        ParamGrads grads;
    };

    for (int iter = 1; iter <= config.iterations; ++iter) {
        // All randomness is drawn up front on the master stream so results do
        // not depend on the worker count.
        int t_steps = static_cast<int>(master.range(config.t_min, config.t_max));
        std::vector<Element> batch(config.batch_size);
        // Balanced composition: cycle through the catalog (rotating the start
        // each iteration) so every shape contributes near-equally to each
        // gradient step instead of fluctuating with uniform sampling.
        for (std::size_t k = 0; k < batch.size(); ++k) {
            auto& el = batch[k];
            el.shape_index = static_cast<int>((k + iter) % shapes.size());
            std::size_t n_cells = active_cells(shapes[el.shape_index]).size();
            el.masks.assign(t_steps, std::vector<bool>(n_cells, false));
            for (auto& step_mask : el.masks)
                for (std::size_t i = 0; i < n_cells; ++i)
                    step_mask[i] = master.bernoulli(1.0 - config.drop_rate);
        }

        std::atomic<int> next{0};
        auto worker = [&] {
            for (;;) {
                int k = next.fetch_add(1);
                if (k >= config.batch_size) break;
                Element& el = batch[k];
                RolloutTape tape = rollout_with_tape(shapes[el.shape_index], params, t_steps, el.masks);
                el.loss_value = loss(tape.grids.back(), shapes[el.shape_index].label);
                el.grads = gradients(tape, shapes[el.shape_index].label);
            }
        };
        if (n_threads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }

        // fixed element-order reduction for bit reproducibility
        double mean_loss = 0.0;
        ParamGrads mean_grads;
        double inv_b = 1.0 / config.batch_size;
        for (const auto& el : batch) {
            mean_loss += el.loss_value;
            mean_grads.add_scaled(el.grads, inv_b);
        }
        mean_loss *= inv_b;

        if (!std::isfinite(mean_loss))
            throw TrainDivergedError("non-finite loss at iteration " + std::to_string(iter));

        if (config.clip_gradients) {
            double norm = mean_grads.global_norm();
            if (norm > 1.0) {
                ParamGrads clipped;
                clipped.add_scaled(mean_grads, 1.0 / norm);
                mean_grads = std::move(clipped);
            }
        }

        adam_step(params, mean_grads, adam, config, iter);
        report.losses.push_back(mean_loss);
        if (config.log_progress)
            std::printf("iter=%d loss=%.6f T=%d\n", iter, mean_loss, t_steps);
    }

    report.final_accuracy.reserve(shapes.size());
    for (const auto& shape : shapes) {
        StateGrid grid = init_grid(shape);
        std::vector<bool> full_mask(active_cells(shape).size(), true);
        for (int t = 0; t < 30; ++t) grid = grid_step(grid, params, full_mask);
        int correct = 0;
        auto cells = active_cells(shape);
        for (auto [x, y] : cells)
            if (classify(grid.at(x, y)) == shape.label) ++correct;
        report.final_accuracy.push_back(static_cast<double>(correct) / cells.size());
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(params), std::move(report)};
}

}  // namespace nca
