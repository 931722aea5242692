#include "nca/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nca/train.hpp"

namespace nca {
namespace {

constexpr char kMagic[8] = {'N', 'C', 'A', 'W', 'G', 'T', '0', '1'};

// dims of the six tensors, flattened in persistence order
const std::vector<std::uint32_t> kDims = {3, 3, 21, 40, 40, 40, 40, 40, 40, 21, 21};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

std::uint32_t get_u32(const std::string& data, std::size_t& pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

float get_f32(const std::string& data, std::size_t& pos) {
    std::uint32_t bits = get_u32(data, pos);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string format_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

}  // namespace

std::uint8_t Quantizer::encode(double v) const {
    double clamped = std::clamp(v, lo, hi);
    // round half up, pinned so other implementations can match byte-for-byte
    double scaled = std::floor(255.0 * (clamped - lo) / (hi - lo) + 0.5);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

double Quantizer::decode(std::uint8_t b) const { return lo + (hi - lo) * b / 255.0; }

QuantizedState Quantizer::quantize(const CellState& state) const {
    QuantizedState out;
    for (int c = 0; c < kStateChannels; ++c) out[c] = encode(state[c]);
    return out;
}

CellState Quantizer::dequantize(const QuantizedState& bytes) const {
    CellState out;
    for (int c = 0; c < kStateChannels; ++c) out[c] = decode(bytes[c]);
    return out;
}

Quantizer quantizer_from_range(double min_seen, double max_seen) {
    double extent = std::max(std::abs(min_seen), std::abs(max_seen));
    if (!(extent > 0.0) || !std::isfinite(extent))
        throw CalibrationError("degenerate state range, cannot calibrate quantizer");
    double bound = 1.05 * extent;
    return Quantizer{-bound, bound};
}

Quantizer calibrate(const ModelParams& params, const std::vector<ShapeGrid>& shapes) {
    if (shapes.empty()) throw CalibrationError("calibrate: shape list is empty");
    double min_seen = 0.0, max_seen = 0.0;
    for (const auto& shape : shapes) {
        StateGrid grid = init_grid(shape);
        auto cells = active_cells(shape);
        std::vector<bool> full_mask(cells.size(), true);
        auto record = [&] {
            for (auto [x, y] : cells)
                for (double v : grid.at(x, y)) {
                    min_seen = std::min(min_seen, v);
                    max_seen = std::max(max_seen, v);
                }
        };
        record();
        for (int t = 0; t < 30; ++t) {
            grid = grid_step(grid, params, full_mask);
            record();
        }
    }
    return quantizer_from_range(min_seen, max_seen);
}

void save_weights(const ModelParams& params, const Quantizer& q, const std::string& path) {
    std::string blob;
    blob.append(kMagic, 8);
    for (std::uint32_t d : kDims) put_u32(blob, d);
    std::size_t count = 0;
    for (auto t : params.tensors())
        for (double v : t) {
            put_f32(blob, static_cast<float>(v));
            ++count;
        }
    if (count != kParamCount) throw WeightFormatError("unexpected parameter count");
    put_f32(blob, static_cast<float>(q.lo));
    put_f32(blob, static_cast<float>(q.hi));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write weight file: " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<ModelParams, Quantizer> load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WeightFormatError("cannot open weight file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string data = ss.str();

    std::size_t expected = 8 + 4 * kDims.size() + 4 * kParamCount + 8;
    if (data.size() != expected)
        throw WeightFormatError("weight file has wrong size: " + path);
    if (std::memcmp(data.data(), kMagic, 8) != 0)
        throw WeightFormatError("bad magic in weight file: " + path);

    std::size_t pos = 8;
    for (std::uint32_t d : kDims)
        if (get_u32(data, pos) != d)
            throw WeightFormatError("unexpected tensor dims in weight file: " + path);

    ModelParams params;
    for (auto t : params.tensors())
        for (double& v : t) v = get_f32(data, pos);
    Quantizer q;
    q.lo = get_f32(data, pos);
    q.hi = get_f32(data, pos);

    if (!params.all_finite()) throw WeightFormatError("non-finite weight in file: " + path);
    if (!params.corners_are_zero())
        throw ShapeValidityError("weight file violates the corner-zero constraint: " + path);
    return {std::move(params), q};
}

std::string export_firmware_array(const ModelParams& params, const Quantizer& q) {
    constexpr long kBytes = static_cast<long>(kParamCount) * 4;
    constexpr long kFlashBytes = 262144;  // ATmega2560 flash
    std::ostringstream out;
    out << "// trained NCA weights, " << kParamCount << " parameters\n";
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.1f", 100.0 * kBytes / kFlashBytes);
    out << "// " << kBytes << " bytes as float32, ~" << pct << "% of a " << kFlashBytes
        << "-byte flash\n";
    out << "const float QUANT_LO = " << format_float(static_cast<float>(q.lo)) << ";\n";
    out << "const float QUANT_HI = " << format_float(static_cast<float>(q.hi)) << ";\n";

    static const char* names[6] = {"PERCEIVE_KERNEL", "PERCEIVE_BIAS", "DMODEL_KERNEL_1",
                                   "DMODEL_BIAS_1",   "DMODEL_KERNEL_2", "DMODEL_BIAS_2"};
    auto tensors = params.tensors();
    for (int t = 0; t < 6; ++t) {
        out << "const float " << names[t] << "[" << tensors[t].size() << "] = {\n";
        for (std::size_t i = 0; i < tensors[t].size(); ++i) {
            out << format_float(static_cast<float>(tensors[t][i]));
            if (i + 1 < tensors[t].size()) out << ',';
            out << ((i % 8 == 7) ? '\n' : ' ');
        }
        if (tensors[t].size() % 8 != 0) out << '\n';
        out << "};\n";
    }
    return out.str();
}

}  // namespace nca
