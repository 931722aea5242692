#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nca/model.hpp"
#include "nca/quantize.hpp"

namespace nca {

// Directions in mailbox order.
enum Direction : int { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };
Direction opposite(Direction d);

struct SimClockConfig {
    std::int64_t update_timeout_ms = 2000;  // firmware update period
    std::int64_t send_jitter_ms = 100;      // uniform send offset per tile per cycle
    double message_loss_rate = 0.0;
};

// Simulated hardware tile: own float state plus one quantized mailbox slot per
// direction holding the latest message received (absent when no neighbor, or
// nothing arrived yet).
struct TileAgent {
    int x = 0;
    int y = 0;
    CellState state{};
    std::array<std::optional<QuantizedState>, 4> last_received;
    int update_count = 0;
    std::int64_t next_update_due = 0;
};

// Trace of a run: per update snapshot, each tile's update count and current
// prediction. Tiles that have not updated yet are unreported.
struct RunReport {
    ShapeGrid shape;
    struct TileSnapshot {
        int update_count = 0;
        int prediction = 0;
        bool reported = false;
    };
    // snapshots[k] is taken after update round k+1; tiles in active_cells order
    std::vector<std::vector<TileSnapshot>> snapshots;
    // earliest 1-based snapshot index at which every tile predicts the true
    // label and never deviates afterwards
    std::optional<int> convergence_update;
};

// Sampling-with-replacement validation: per outer step, N single-cell
// evaluations on uniformly chosen cells, each applied immediately to the
// shared float grid.
RunReport listing1_validate(const ShapeGrid& shape, const ModelParams& params, int n_steps,
                            std::uint64_t rng_seed);

// Synchronous full-mask reference run, reported in the same trace format.
RunReport sync_run(const ShapeGrid& shape, const ModelParams& params, int n_steps);

// Firmware-faithful run: tiles broadcast their quantized state once per
// timeout period at a jittered offset, keep the latest message per direction,
// and update on their own timers until each has done 30 updates.
RunReport firmware_run(const ShapeGrid& shape, const ModelParams& params, const Quantizer& q,
                       const SimClockConfig& clock, std::uint64_t rng_seed);

// Same event schedule but messages carry exact float states; used to check
// the firmware loop against the synchronous reference.
RunReport firmware_run_lossless(const ShapeGrid& shape, const ModelParams& params,
                                const SimClockConfig& clock, std::uint64_t rng_seed);

// One firmware update: dequantize the mailboxes (absent slot = zero vector),
// apply the cell update to the agent's own float state, bump update_count.
// The 30-update cap is a precondition.
void tile_update(TileAgent& agent, const ModelParams& params, const Quantizer& q);

// Text panels, one per snapshot: digit glyph per reporting tile, middle dot
// for tiles that have not updated, space for empty grid positions.
std::string render_trace(const RunReport& report);

// Line-oriented export: "<update_index> <tile_x> <tile_y> <prediction|->".
std::string export_report(const RunReport& report);

}  // namespace nca
