#include "nca/shapes.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace nca {
namespace {

ShapeGrid from_rows(const std::vector<std::string>& rows, int label) {
    std::ostringstream joined;
    for (const auto& row : rows) joined << row << '\n';
    ShapeGrid shape = parse_shape(joined.str(), label);
    validate_shape(shape);
    return shape;
}

}  // namespace

int ShapeGrid::active_count() const {
    return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

void validate_shape(const ShapeGrid& shape) {
    if (shape.label < 0 || shape.label > 9)
        throw ShapeValidityError("shape label out of range [0,9]: " + std::to_string(shape.label));
    if (shape.width <= 0 || shape.height <= 0 ||
        shape.mask.size() != static_cast<std::size_t>(shape.width) * shape.height)
        throw ShapeValidityError("shape mask dimensions inconsistent");
    int total = shape.active_count();
    if (total == 0) throw ShapeValidityError("shape has no active cells");

    // Flood fill from the first active cell; every active cell must be reached
    // through 4-neighbor moves.
    std::vector<bool> seen(shape.mask.size(), false);
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < shape.height && stack.empty(); ++y)
        for (int x = 0; x < shape.width && stack.empty(); ++x)
            if (shape.at(x, y)) {
                stack.emplace_back(x, y);
                seen[static_cast<std::size_t>(y) * shape.width + x] = true;
            }
    int reached = 0;
    while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        ++reached;
        constexpr int dx[] = {0, 1, 0, -1};
        constexpr int dy[] = {-1, 0, 1, 0};
        for (int d = 0; d < 4; ++d) {
            int nx = x + dx[d], ny = y + dy[d];
            if (shape.active(nx, ny)) {
                std::size_t idx = static_cast<std::size_t>(ny) * shape.width + nx;
                if (!seen[idx]) {
                    seen[idx] = true;
                    stack.emplace_back(nx, ny);
                }
            }
        }
    }
    if (reached != total)
        throw ShapeValidityError("active cells are not a single 4-connected component");
}

std::vector<ShapeGrid> canonical_shapes() {
    // Seven-segment style 4x5 bitmaps. "1" is a bare right-column stroke and
    // has the fewest active cells of the ten.
    static const std::vector<std::vector<std::string>> rows = {
        {"###.", "#.#.", "#.#.", "#.#.", "###."},  // 0
        {"#...", "#...", "#...", "#...", "#..."},  // 1
        {"####", ".#..", "####", "#...", "###."},  // 2
        {"####", "...#", ".###", "...#", "####"},  // 3
        {"#..#", "#..#", "####", "...#", "...#"},  // 4
        {"###.", "#...", "####", "...#", ".###"},  // 5
        {"#...", "##..", "####", "#..#", "####"},  // 6
        {"####", "...#", "...#", "...#", "...#"},  // 7
        {"####", "#..#", "####", "#..#", "####"},  // 8
        {".###", "#..#", "####", "..##", ".###"},  // 9
    };
    std::vector<ShapeGrid> shapes;
    for (int d = 0; d < 10; ++d) shapes.push_back(from_rows(rows[d], d));
    return shapes;
}

std::vector<ShapeGrid> scaled_down_shapes() {
    // Shrunken canonical digits: one row and one column removed so the local
    // stroke layout each cell sees matches the full-size rendering. "8" keeps
    // one enclosed hole; a second does not fit in four rows.
    static const std::vector<std::pair<int, std::vector<std::string>>> rows = {
        {0, {"###", "#.#", "#.#", "###"}},
        {1, {"..#", "..#", "..#", "..#"}},
        {4, {"#.#", "#.#", "###", "..#"}},
        {7, {"###", "..#", "..#", "..#"}},
        {8, {"###", "#.#", "###", "#.#"}},
    };
    std::vector<ShapeGrid> shapes;
    for (const auto& [label, r] : rows) shapes.push_back(from_rows(r, label));
    return shapes;
}

std::vector<ShapeGrid> scaled_up_shapes() {
    // Enlarged canonical digits: one row or column duplicated so every local
    // stroke pattern still appears at the scale the model was trained on.
    static const std::vector<std::vector<std::string>> rows = {
        {"###", "#.#", "#.#", "#.#", "#.#", "###"},       // 0
        {"#", "#", "#", "#", "#", "#"},                   // 1
        {"#####", ".##..", "#####", "#....", "####."},    // 2
        {"#####", "....#", "...##", "....#", "#####"},    // 3
        {"#...#", "#...#", "#####", "....#", "....#"},    // 4
        {"###.", "#...", "#...", "####", "...#", ".###"},  // 5
        {"#....", "###..", "#####", "#...#", "#####"},    // 6
        {"####", "...#", "...#", "...#", "...#", "...#"},  // 7
        {"#####", "#...#", "#####", "#...#", "#####"},    // 8
        {".###", "#..#", "####", "####", "..##", ".###"},  // 9
    };
    std::vector<ShapeGrid> shapes;
    for (int d = 0; d < 10; ++d) shapes.push_back(from_rows(rows[d], d));
    return shapes;
}

ShapeGrid parse_shape(const std::string& text, int label) {
    std::vector<std::string> lines;
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) lines.push_back(line);
    if (lines.empty()) throw ShapeFormatError("empty shape text");

    std::size_t width = lines.front().size();
    for (const auto& l : lines) {
        if (l.size() != width) throw ShapeFormatError("ragged shape lines");
        for (char c : l)
            if (c != '#' && c != '.')
                throw ShapeFormatError(std::string("unexpected glyph '") + c + "' in shape text");
    }

    ShapeGrid shape;
    shape.width = static_cast<int>(width);
    shape.height = static_cast<int>(lines.size());
    shape.label = label;
    shape.mask.reserve(width * lines.size());
    for (const auto& l : lines)
        for (char c : l) shape.mask.push_back(c == '#');
    validate_shape(shape);
    return shape;
}

std::string render_shape(const ShapeGrid& shape) {
    std::string out;
    out.reserve(static_cast<std::size_t>(shape.height) * (shape.width + 1));
    for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) out += shape.at(x, y) ? '#' : '.';
        out += '\n';
    }
    return out;
}

ShapeGrid load_shape_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ShapeFormatError("cannot open shape file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw ShapeFormatError("empty shape file: " + path);
    std::istringstream hs(header);
    std::string key;
    int label = -1;
    hs >> key >> label;
    if (key != "label" || label < 0 || label > 9)
        throw ShapeFormatError("bad shape file header (want 'label <digit>'): " + header);
    std::ostringstream rest;
    rest << in.rdbuf();
    return parse_shape(rest.str(), label);
}

void save_shape_file(const ShapeGrid& shape, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write shape file: " + path);
    out << "label " << shape.label << '\n' << render_shape(shape);
}

}  // namespace nca
