#include "nca/model.hpp"

#include <cmath>

namespace nca {

std::array<std::span<double>, 6> ModelParams::tensors() {
    return {std::span<double>(perceive_kernel), std::span<double>(perceive_bias),
            std::span<double>(hidden_kernel),   std::span<double>(hidden_bias),
            std::span<double>(out_kernel),      std::span<double>(out_bias)};
}

std::array<std::span<const double>, 6> ModelParams::tensors() const {
    return {std::span<const double>(perceive_kernel), std::span<const double>(perceive_bias),
            std::span<const double>(hidden_kernel),   std::span<const double>(hidden_bias),
            std::span<const double>(out_kernel),      std::span<const double>(out_bias)};
}

void ModelParams::clamp_corners() {
    for (int tap : kCornerTaps)
        for (int in = 0; in < kStateChannels; ++in)
            for (int out = 0; out < kHiddenChannels; ++out) perceive_at(tap, in, out) = 0.0;
}

bool ModelParams::corners_are_zero() const {
    for (int tap : kCornerTaps)
        for (int in = 0; in < kStateChannels; ++in)
            for (int out = 0; out < kHiddenChannels; ++out)
                if (perceive_at(tap, in, out) != 0.0) return false;
    return true;
}

bool ModelParams::all_finite() const {
    for (auto t : tensors())
        for (double v : t)
            if (!std::isfinite(v)) return false;
    return true;
}

StateGrid init_grid(const ShapeGrid& shape) {
    validate_shape(shape);
    StateGrid grid;
    grid.shape = shape;
    grid.states.assign(shape.mask.size(), zero_state());
    for (int y = 0; y < shape.height; ++y)
        for (int x = 0; x < shape.width; ++x)
            if (shape.at(x, y)) grid.at(x, y)[0] = 1.0;
    return grid;
}

CellState cell_update(const CellState& center, const CellState& north, const CellState& east,
                      const CellState& south, const CellState& west, const ModelParams& params) {
    // perceive: five cardinal taps of the 3x3 kernel, then ReLU
    std::array<double, kHiddenChannels> h1;
    for (int o = 0; o < kHiddenChannels; ++o) h1[o] = params.perceive_bias[o];
    const std::pair<int, const CellState*> taps[] = {
        {kTapCenter, &center}, {kTapNorth, &north}, {kTapEast, &east},
        {kTapSouth, &south},   {kTapWest, &west},
    };
    for (auto [tap, state] : taps) {
        const double* k = &params.perceive_kernel[static_cast<std::size_t>(tap) * kStateChannels * kHiddenChannels];
        for (int c = 0; c < kStateChannels; ++c) {
            double v = (*state)[c];
            if (v == 0.0) continue;
            const double* row = k + static_cast<std::size_t>(c) * kHiddenChannels;
            for (int o = 0; o < kHiddenChannels; ++o) h1[o] += v * row[o];
        }
    }
    for (double& v : h1) v = v > 0.0 ? v : 0.0;

    // hidden 1x1 with ReLU
    std::array<double, kHiddenChannels> h2;
    for (int o = 0; o < kHiddenChannels; ++o) h2[o] = params.hidden_bias[o];
    for (int i = 0; i < kHiddenChannels; ++i) {
        double v = h1[i];
        if (v == 0.0) continue;
        const double* row = &params.hidden_kernel[static_cast<std::size_t>(i) * kHiddenChannels];
        for (int o = 0; o < kHiddenChannels; ++o) h2[o] += v * row[o];
    }
    for (double& v : h2) v = v > 0.0 ? v : 0.0;

    // output 1x1, linear
    CellState delta;
    for (int o = 0; o < kStateChannels; ++o) delta[o] = params.out_bias[o];
    for (int i = 0; i < kHiddenChannels; ++i) {
        double v = h2[i];
        if (v == 0.0) continue;
        const double* row = &params.out_kernel[static_cast<std::size_t>(i) * kStateChannels];
        for (int o = 0; o < kStateChannels; ++o) delta[o] += v * row[o];
    }
    return delta;
}

std::vector<std::pair<int, int>> active_cells(const ShapeGrid& shape) {
    std::vector<std::pair<int, int>> cells;
    for (int y = 0; y < shape.height; ++y)
        for (int x = 0; x < shape.width; ++x)
            if (shape.at(x, y)) cells.emplace_back(x, y);
    return cells;
}

StateGrid grid_step(const StateGrid& grid, const ModelParams& params,
                    const std::vector<bool>& update_mask) {
    StateGrid next = grid;
    auto cells = active_cells(grid.shape);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!update_mask[i]) continue;
        auto [x, y] = cells[i];
        CellState delta = cell_update(grid.at(x, y), grid.neighbor(x, y - 1), grid.neighbor(x + 1, y),
                                      grid.neighbor(x, y + 1), grid.neighbor(x - 1, y), params);
        CellState& s = next.at(x, y);
        for (int c = 0; c < kStateChannels; ++c) s[c] += delta[c];
    }
    // empty positions never accumulate state; the mask loop above only touches
    // active cells, so they are already exactly zero
    return next;
}

int classify(const CellState& state) {
    int best = 0;
    double best_v = state[kLogitOffset];
    for (int c = 1; c < kNumClasses; ++c) {
        double v = state[kLogitOffset + c];
        if (v > best_v) {
            best_v = v;
            best = c;
        }
    }
    return best;
}

}  // namespace nca
