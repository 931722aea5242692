#include "nca/sim.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "nca/rng.hpp"

namespace nca {
namespace {

constexpr int kUpdateCap = 30;

constexpr std::array<std::pair<int, int>, 4> kDirOffsets = {{
    {0, -1},  // north
    {1, 0},   // east
    {0, 1},   // south
    {-1, 0},  // west
}};

void finish_report(RunReport& report) {
    const int label = report.shape.label;
    // scan backwards for the earliest suffix of all-correct snapshots
    std::optional<int> converged;
    for (int k = static_cast<int>(report.snapshots.size()) - 1; k >= 0; --k) {
        bool all_correct = true;
        for (const auto& tile : report.snapshots[k])
            if (!tile.reported || tile.prediction != label) {
                all_correct = false;
                break;
            }
        if (!all_correct) break;
        converged = k + 1;
    }
    report.convergence_update = converged;
}

// Shared event schedule for the firmware loop; the codec decides what a
// message carries (bytes on the real link, floats for the reference check).
template <class Codec>
RunReport run_firmware(const ShapeGrid& shape, const ModelParams& params, const Codec& codec,
                       const SimClockConfig& clock, std::uint64_t rng_seed) {
    if (clock.update_timeout_ms <= 0) throw std::invalid_argument("update_timeout_ms must be > 0");
    validate_shape(shape);
    auto cells = active_cells(shape);
    const int n = static_cast<int>(cells.size());

    struct Tile {
        int x, y;
        CellState state;
        std::array<std::optional<typename Codec::Message>, 4> mailbox;
        std::array<int, 4> neighbor = {-1, -1, -1, -1};  // index into tiles
        int update_count = 0;
    };
    std::vector<Tile> tiles(n);
    std::vector<int> index_of(shape.mask.size(), -1);
    for (int i = 0; i < n; ++i) {
        auto [x, y] = cells[i];
        tiles[i].x = x;
        tiles[i].y = y;
        tiles[i].state = zero_state();
        tiles[i].state[0] = 1.0;
        index_of[static_cast<std::size_t>(y) * shape.width + x] = i;
    }
    for (auto& tile : tiles)
        for (int d = 0; d < 4; ++d) {
            int nx = tile.x + kDirOffsets[d].first, ny = tile.y + kDirOffsets[d].second;
            if (shape.active(nx, ny))
                tile.neighbor[d] = index_of[static_cast<std::size_t>(ny) * shape.width + nx];
        }

    // Draw all randomness up front in a fixed order.
    Rng rng(rng_seed);
    std::vector<std::int64_t> jitter(static_cast<std::size_t>(kUpdateCap) * n);
    std::vector<bool> lost(static_cast<std::size_t>(kUpdateCap) * n * 4);
    for (int k = 0; k < kUpdateCap; ++k)
        for (int i = 0; i < n; ++i) {
            jitter[static_cast<std::size_t>(k) * n + i] =
                clock.send_jitter_ms > 0 ? rng.range(0, clock.send_jitter_ms) : 0;
            for (int d = 0; d < 4; ++d)
                lost[(static_cast<std::size_t>(k) * n + i) * 4 + d] =
                    clock.message_loss_rate > 0.0 && rng.bernoulli(clock.message_loss_rate);
        }

    // Events ordered by (time, kind, tile); updates before sends at equal
    // times so that a zero-jitter run reproduces the synchronous reference.
    struct Event {
        std::int64_t time;
        int kind;  // 0 = update, 1 = send
        int tile;
        int period;
        bool operator<(const Event& o) const {
            return std::tie(time, kind, tile) < std::tie(o.time, o.kind, o.tile);
        }
    };
    std::vector<Event> events;
    events.reserve(static_cast<std::size_t>(2 * kUpdateCap) * n);
    for (int k = 0; k < kUpdateCap; ++k)
        for (int i = 0; i < n; ++i) {
            events.push_back({k * clock.update_timeout_ms + jitter[static_cast<std::size_t>(k) * n + i],
                              1, i, k});
            events.push_back({(k + 1) * clock.update_timeout_ms, 0, i, k});
        }
    std::sort(events.begin(), events.end());

    RunReport report;
    report.shape = shape;
    // per tile, prediction after each of its updates
    std::vector<std::vector<int>> predictions(n);

    for (const Event& ev : events) {
        Tile& tile = tiles[ev.tile];
        if (ev.kind == 1) {
            auto msg = codec.encode(tile.state);
            for (int d = 0; d < 4; ++d) {
                int ni = tile.neighbor[d];
                if (ni < 0) continue;
                if (lost[(static_cast<std::size_t>(ev.period) * n + ev.tile) * 4 + d]) continue;
                tiles[ni].mailbox[opposite(static_cast<Direction>(d))] = msg;
            }
        } else {
            std::array<CellState, 4> nb;
            for (int d = 0; d < 4; ++d)
                nb[d] = tile.mailbox[d] ? codec.decode(*tile.mailbox[d]) : zero_state();
            CellState delta = cell_update(tile.state, nb[kNorth], nb[kEast], nb[kSouth],
                                          nb[kWest], params);
            for (int c = 0; c < kStateChannels; ++c) tile.state[c] += delta[c];
            ++tile.update_count;
            predictions[ev.tile].push_back(classify(tile.state));
        }
    }

    report.snapshots.assign(kUpdateCap, std::vector<RunReport::TileSnapshot>(n));
    for (int u = 1; u <= kUpdateCap; ++u)
        for (int i = 0; i < n; ++i) {
            int done = std::min<int>(u, static_cast<int>(predictions[i].size()));
            auto& snap = report.snapshots[u - 1][i];
            snap.update_count = done;
            snap.reported = done > 0;
            snap.prediction = done > 0 ? predictions[i][done - 1] : 0;
        }
    finish_report(report);
    return report;
}

struct ByteCodec {
    const Quantizer* q;
    using Message = QuantizedState;
    Message encode(const CellState& s) const { return q->quantize(s); }
    CellState decode(const Message& m) const { return q->dequantize(m); }
};

struct FloatCodec {
    using Message = CellState;
    Message encode(const CellState& s) const { return s; }
    CellState decode(const Message& m) const { return m; }
};

}  // namespace

Direction opposite(Direction d) {
    switch (d) {
        case kNorth: return kSouth;
        case kEast: return kWest;
        case kSouth: return kNorth;
        case kWest: return kEast;
    }
    throw std::invalid_argument("bad direction");
}

RunReport listing1_validate(const ShapeGrid& shape, const ModelParams& params, int n_steps,
                            std::uint64_t rng_seed) {
    if (n_steps < 1) throw std::invalid_argument("listing1_validate: n_steps must be >= 1");
    validate_shape(shape);
    Rng rng(rng_seed);
    StateGrid grid = init_grid(shape);
    auto cells = active_cells(shape);
    const int n = static_cast<int>(cells.size());
    std::vector<int> eval_count(n, 0);

    RunReport report;
    report.shape = shape;
    for (int step = 0; step < n_steps; ++step) {
        for (int j = 0; j < n; ++j) {
            int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            auto [x, y] = cells[pick];
            // reads neighbors' current states, applies the update immediately
            CellState delta = cell_update(grid.at(x, y), grid.neighbor(x, y - 1),
                                          grid.neighbor(x + 1, y), grid.neighbor(x, y + 1),
                                          grid.neighbor(x - 1, y), params);
            CellState& s = grid.at(x, y);
            for (int c = 0; c < kStateChannels; ++c) s[c] += delta[c];
            ++eval_count[pick];
        }
        std::vector<RunReport::TileSnapshot> snap(n);
        for (int i = 0; i < n; ++i) {
            auto [x, y] = cells[i];
            snap[i].update_count = eval_count[i];
            snap[i].reported = eval_count[i] > 0;
            snap[i].prediction = classify(grid.at(x, y));
        }
        report.snapshots.push_back(std::move(snap));
    }
    finish_report(report);
    return report;
}

RunReport sync_run(const ShapeGrid& shape, const ModelParams& params, int n_steps) {
    validate_shape(shape);
    StateGrid grid = init_grid(shape);
    auto cells = active_cells(shape);
    std::vector<bool> full_mask(cells.size(), true);
    RunReport report;
    report.shape = shape;
    for (int t = 1; t <= n_steps; ++t) {
        grid = grid_step(grid, params, full_mask);
        std::vector<RunReport::TileSnapshot> snap(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            auto [x, y] = cells[i];
            snap[i] = {t, classify(grid.at(x, y)), true};
        }
        report.snapshots.push_back(std::move(snap));
    }
    finish_report(report);
    return report;
}

RunReport firmware_run(const ShapeGrid& shape, const ModelParams& params, const Quantizer& q,
                       const SimClockConfig& clock, std::uint64_t rng_seed) {
    return run_firmware(shape, params, ByteCodec{&q}, clock, rng_seed);
}

RunReport firmware_run_lossless(const ShapeGrid& shape, const ModelParams& params,
                                const SimClockConfig& clock, std::uint64_t rng_seed) {
    return run_firmware(shape, params, FloatCodec{}, clock, rng_seed);
}

void tile_update(TileAgent& agent, const ModelParams& params, const Quantizer& q) {
    if (agent.update_count >= kUpdateCap)
        throw std::logic_error("tile_update: update cap reached");
    std::array<CellState, 4> nb;
    for (int d = 0; d < 4; ++d)
        nb[d] = agent.last_received[d] ? q.dequantize(*agent.last_received[d]) : zero_state();
    CellState delta =
        cell_update(agent.state, nb[kNorth], nb[kEast], nb[kSouth], nb[kWest], params);
    for (int c = 0; c < kStateChannels; ++c) agent.state[c] += delta[c];
    ++agent.update_count;
}

std::string render_trace(const RunReport& report) {
    std::ostringstream out;
    auto cells = active_cells(report.shape);
    for (std::size_t k = 0; k < report.snapshots.size(); ++k) {
        out << "update " << (k + 1) << "\n";
        const auto& snap = report.snapshots[k];
        for (int y = 0; y < report.shape.height; ++y) {
            for (int x = 0; x < report.shape.width; ++x) {
                if (!report.shape.at(x, y)) {
                    out << ' ';
                    continue;
                }
                std::size_t i = std::find(cells.begin(), cells.end(), std::make_pair(x, y)) -
                                cells.begin();
                if (snap[i].reported)
                    out << static_cast<char>('0' + snap[i].prediction);
                else
                    out << "·";
            }
            out << '\n';
        }
        out << '\n';
    }
    return out.str();
}

std::string export_report(const RunReport& report) {
    std::ostringstream out;
    auto cells = active_cells(report.shape);
    for (std::size_t k = 0; k < report.snapshots.size(); ++k)
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& tile = report.snapshots[k][i];
            out << (k + 1) << ' ' << cells[i].first << ' ' << cells[i].second << ' ';
            if (tile.reported)
                out << tile.prediction;
            else
                out << '-';
            out << '\n';
        }
    return out.str();
}

}  // namespace nca
