#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nca {

struct ShapeFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeValidityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Boolean occupancy mask plus the digit label it represents. Active cells are
// the physical tiles; they must form a single 4-connected component.
struct ShapeGrid {
    int width = 0;
    int height = 0;
    std::vector<bool> mask;  // row-major, width*height
    int label = 0;

    bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    bool active(int x, int y) const { return in_bounds(x, y) && at(x, y); }
    int active_count() const;

    bool operator==(const ShapeGrid&) const = default;
};

// Throws ShapeValidityError if the mask is empty, disconnected, or the label
// is out of range.
void validate_shape(const ShapeGrid& shape);

// The ten 4x5 digit bitmaps used for training, labels 0..9.
std::vector<ShapeGrid> canonical_shapes();

// 3x4 versions of the digits that survive downscaling: 0, 1, 4, 7, 8.
std::vector<ShapeGrid> scaled_down_shapes();

// 6x7 versions of all ten digits.
std::vector<ShapeGrid> scaled_up_shapes();

// Parses a '#'/'.' glyph grid. Lines must be equal length.
ShapeGrid parse_shape(const std::string& text, int label);

// Inverse of parse_shape: '#' for active, '.' for empty, newline-terminated rows.
std::string render_shape(const ShapeGrid& shape);

// Shape file format: first line "label <digit>", remaining lines the mask.
ShapeGrid load_shape_file(const std::string& path);
void save_shape_file(const ShapeGrid& shape, const std::string& path);

}  // namespace nca
