#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "nca/shapes.hpp"

namespace nca {

inline constexpr int kStateChannels = 21;
inline constexpr int kHiddenChannels = 40;
inline constexpr int kNumClasses = 10;
// Channel 0 is the aliveness seed at init; channels 11..20 are the class logits.
inline constexpr int kLogitOffset = kStateChannels - kNumClasses;
inline constexpr int kParamCount =
    9 * kStateChannels * kHiddenChannels + kHiddenChannels +          // perceive
    kHiddenChannels * kHiddenChannels + kHiddenChannels +             // hidden 1x1
    kHiddenChannels * kStateChannels + kStateChannels;                // output 1x1

using CellState = std::array<double, kStateChannels>;

inline CellState zero_state() { return CellState{}; }

// Weights of the per-cell update network: 3x3 perceive convolution (diagonal
// taps structurally zero), ReLU, 40->40 with ReLU, 40->21 linear.
struct ModelParams {
    // perceive_kernel[tap][in][out], tap = row*3+col, row-major taps.
    std::vector<double> perceive_kernel = std::vector<double>(9 * kStateChannels * kHiddenChannels, 0.0);
    std::vector<double> perceive_bias = std::vector<double>(kHiddenChannels, 0.0);
    std::vector<double> hidden_kernel = std::vector<double>(kHiddenChannels * kHiddenChannels, 0.0);
    std::vector<double> hidden_bias = std::vector<double>(kHiddenChannels, 0.0);
    std::vector<double> out_kernel = std::vector<double>(kHiddenChannels * kStateChannels, 0.0);
    std::vector<double> out_bias = std::vector<double>(kStateChannels, 0.0);

    double& perceive_at(int tap, int in, int out) {
        return perceive_kernel[(static_cast<std::size_t>(tap) * kStateChannels + in) * kHiddenChannels + out];
    }
    double perceive_at(int tap, int in, int out) const {
        return perceive_kernel[(static_cast<std::size_t>(tap) * kStateChannels + in) * kHiddenChannels + out];
    }

    // The six tensors in persistence order.
    std::array<std::span<double>, 6> tensors();
    std::array<std::span<const double>, 6> tensors() const;

    // Forces the four diagonal taps of the perceive kernel to zero.
    void clamp_corners();
    bool corners_are_zero() const;
    bool all_finite() const;

    bool operator==(const ModelParams&) const = default;
};

// Taps of the 3x3 kernel that the hardware can actually use.
inline constexpr int kTapCenter = 4;
inline constexpr int kTapNorth = 1;
inline constexpr int kTapWest = 3;
inline constexpr int kTapEast = 5;
inline constexpr int kTapSouth = 7;
inline constexpr std::array<int, 4> kCornerTaps = {0, 2, 6, 8};

// One CellState per grid position; empty positions are kept exactly zero.
struct StateGrid {
    ShapeGrid shape;
    std::vector<CellState> states;  // row-major, width*height

    CellState& at(int x, int y) { return states[static_cast<std::size_t>(y) * shape.width + x]; }
    const CellState& at(int x, int y) const {
        return states[static_cast<std::size_t>(y) * shape.width + x];
    }
    // Neighbor state with zero padding outside the grid.
    CellState neighbor(int x, int y) const {
        return shape.in_bounds(x, y) ? at(x, y) : zero_state();
    }

    bool operator==(const StateGrid&) const = default;
};

// Active cells start as (1, 0, ..., 0); empty positions are all zero.
StateGrid init_grid(const ShapeGrid& shape);

// The additive update for one cell given its own state and its four cardinal
// neighbors (zero vectors when absent).
CellState cell_update(const CellState& center, const CellState& north, const CellState& east,
                      const CellState& south, const CellState& west, const ModelParams& params);

// Synchronous step: all deltas from the pre-step grid, applied where the mask
// is true (one mask entry per active cell in row-major order).
StateGrid grid_step(const StateGrid& grid, const ModelParams& params,
                    const std::vector<bool>& update_mask);

// Argmax over the class logits, ties broken toward the lowest class index.
int classify(const CellState& state);

// Row-major list of active cell positions, the canonical cell ordering used
// for masks and reports.
std::vector<std::pair<int, int>> active_cells(const ShapeGrid& shape);

}  // namespace nca
