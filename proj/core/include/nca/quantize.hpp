#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nca/model.hpp"

namespace nca {

struct WeightFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using QuantizedState = std::array<std::uint8_t, kStateChannels>;

// Linear float<->byte map used on the serial links: byte 0 <-> lo, 255 <-> hi.
struct Quantizer {
    double lo = -1.0;
    double hi = 1.0;

    std::uint8_t encode(double v) const;
    double decode(std::uint8_t b) const;

    QuantizedState quantize(const CellState& state) const;
    CellState dequantize(const QuantizedState& bytes) const;

    double step() const { return (hi - lo) / 255.0; }

    bool operator==(const Quantizer&) const = default;
};

// Quantizer from observed state extrema: symmetrized about 0 and widened 5%.
Quantizer quantizer_from_range(double min_seen, double max_seen);

// Runs 30 synchronous no-drop steps on every shape and calibrates from the
// min/max over all cell-state entries seen along the way.
Quantizer calibrate(const ModelParams& params, const std::vector<ShapeGrid>& shapes);

// Binary weight file: magic "NCAWGT01", tensor dims as u32 LE, payload of
// 10101 f32 LE in tensor order, footer quantizer lo/hi as f32.
void save_weights(const ModelParams& params, const Quantizer& q, const std::string& path);
std::pair<ModelParams, Quantizer> load_weights(const std::string& path);

// Plain-text constant-array listing for pasting into tile firmware.
std::string export_firmware_array(const ModelParams& params, const Quantizer& q);

}  // namespace nca
