#ifndef EVSNN_TILER_HPP
#define EVSNN_TILER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "evsnn/engine.hpp"
#include "evsnn/network.hpp"
#include "evsnn/types.hpp"

namespace evsnn {

class PlanMismatch : public Error {
public:
    using Error::Error;
};
class OverlapDetected : public Error {
public:
    using Error::Error;
};
class CoverageGap : public Error {
public:
    using Error::Error;
};

// Partition of one layer's output neurons into capacity-sized tiles.
struct TilePlan {
    int layer_index = 0;
    int capacity = 0;
    std::vector<TileRange> tiles;
};

// Contiguous partition; every tile holds at most `capacity` neurons and the
// tile count is exactly ceil(neurons / capacity). One plan per non-input layer.
std::vector<TilePlan> plan_tiles(const NetworkSpec& net, int capacity);
TilePlan plan_layer_tiles(const LayerSpec& layer, int capacity);

// Input stream for one execution slot. Spatial consumers receive the rows
// their receptive fields touch (plus halo); dense consumers receive the full
// input.
struct TileStream {
    SpikeTensor slab;
    int row_begin = 0; // plane row of slab row 0
    int row_end = 0;
    bool full_input = false;
    std::uint64_t spike_count = 0; // spikes moved into this stream
};

std::vector<TileStream> split_stream(const SpikeTensor& layer_input,
                                     const LayerSpec& consumer,
                                     const TilePlan& plan);

// Reassembles per-tile output streams (steps x tile-size, in plan order) into
// the layer's full tensor. The result only depends on the plan, not on the
// order tiles finished in.
SpikeTensor merge_streams(const std::vector<SpikeTensor>& tile_outputs,
                          const TilePlan& plan, int steps,
                          TensorShape out_shape);

// Cuts a layer's full output into per-tile views; inverse of merge_streams.
std::vector<SpikeTensor> slice_output(const SpikeTensor& full, const TilePlan& plan);

struct ScheduleSlot {
    int layer_index = 0;
    int tile_index = 0;
    TileRange out_range;
    bool full_input = false; // dense consumer, stream is the whole input
    int in_row_begin = 0;
    int in_row_end = 0;
};

// Layer-synchronous time multiplexing: all slots of layer L precede every
// slot of layer L+1.
struct TiledSchedule {
    std::vector<ScheduleSlot> slots;
};

TiledSchedule build_schedule(const NetworkSpec& net,
                             const std::vector<TilePlan>& plans);
std::string format_schedule(const NetworkSpec& net,
                            const std::vector<TilePlan>& plans,
                            const TiledSchedule& schedule);

// Work counters for the performance model: split/merge traffic in spikes and
// the number of executed (layer, tile) slots.
struct TiledRunStats {
    std::uint64_t stream_spikes = 0;
    std::uint64_t tile_slots = 0;
    std::uint64_t timesteps = 0;
};

// Capacity-constrained execution; bit-identical to run_network for every
// capacity >= 1.
NetworkResult run_tiled(const NetworkSpec& net, const SpikeTensor& input,
                        int capacity, const EngineConfig& cfg = {},
                        TiledRunStats* stats = nullptr);

} // namespace evsnn

#endif
