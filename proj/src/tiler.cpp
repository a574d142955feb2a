#include "evsnn/tiler.hpp"

#include <algorithm>
#include <cstring>

namespace evsnn {

namespace {

// Input rows a spatial tile's receptive fields touch, clamped to the plane.
std::pair<int, int> input_row_window(const LayerSpec& consumer, TileRange range,
                                     int in_h) {
    const int row_neurons = consumer.out_shape.w * consumer.out_shape.c;
    const int y0 = range.begin / row_neurons;
    const int y1 = (range.end - 1) / row_neurons;
    const int pad = consumer.kind == LayerKind::Conv ? consumer.padding : 0;
    const int r0 = std::max(0, y0 * consumer.stride - pad);
    const int r1 = std::min(in_h, y1 * consumer.stride - pad + consumer.kernel_h);
    return {r0, std::max(r0, r1)};
}

void check_plan_covers(const TilePlan& plan, int neurons) {
    if (plan.tiles.empty()) throw CoverageGap("plan has no tiles");
    std::vector<TileRange> sorted = plan.tiles;
    std::sort(sorted.begin(), sorted.end(),
              [](const TileRange& a, const TileRange& b) {
                  return a.begin < b.begin;
              });
    int cursor = 0;
    for (const TileRange& r : sorted) {
        if (r.begin >= r.end) {
            throw PlanMismatch("plan contains an empty tile range");
        }
        if (r.begin < cursor) {
            throw OverlapDetected("tiles [" + std::to_string(r.begin) + "," +
                                  std::to_string(r.end) + ") overlap at neuron " +
                                  std::to_string(r.begin));
        }
        if (r.begin > cursor) {
            throw CoverageGap("neurons [" + std::to_string(cursor) + "," +
                              std::to_string(r.begin) + ") are not covered");
        }
        cursor = r.end;
    }
    if (cursor != neurons) {
        throw CoverageGap("plan covers " + std::to_string(cursor) +
                          " neurons, layer has " + std::to_string(neurons));
    }
}

} // namespace

TilePlan plan_layer_tiles(const LayerSpec& layer, int capacity) {
    if (capacity < 1) throw PlanMismatch("capacity must be at least 1");
    TilePlan plan;
    plan.layer_index = layer.index;
    plan.capacity = capacity;
    const int n = layer.flat_size();
    for (int begin = 0; begin < n; begin += capacity) {
        plan.tiles.push_back({begin, std::min(begin + capacity, n)});
    }
    return plan;
}

std::vector<TilePlan> plan_tiles(const NetworkSpec& net, int capacity) {
    std::vector<TilePlan> plans;
    for (int li = 1; li < net.layer_count(); ++li) {
        plans.push_back(plan_layer_tiles(net.layer(li), capacity));
    }
    return plans;
}

std::vector<TileStream> split_stream(const SpikeTensor& layer_input,
                                     const LayerSpec& consumer,
                                     const TilePlan& plan) {
    if (plan.layer_index != consumer.index) {
        throw PlanMismatch("plan is for layer " +
                           std::to_string(plan.layer_index) + ", consumer is " +
                           std::to_string(consumer.index));
    }
    check_plan_covers(plan, consumer.flat_size());

    std::vector<TileStream> streams;
    streams.reserve(plan.tiles.size());
    for (const TileRange& range : plan.tiles) {
        TileStream stream;
        if (consumer.kind == LayerKind::Full) {
            stream.full_input = true;
            stream.row_begin = 0;
            stream.row_end = layer_input.shape().h;
            stream.slab = layer_input;
        } else {
            auto [r0, r1] =
                input_row_window(consumer, range, layer_input.shape().h);
            stream.row_begin = r0;
            stream.row_end = r1;
            const TensorShape& in = layer_input.shape();
            stream.slab =
                SpikeTensor(layer_input.steps(), TensorShape{r1 - r0, in.w, in.c});
            const std::size_t row_bytes =
                static_cast<std::size_t>(in.w) * in.c;
            for (int t = 0; t < layer_input.steps(); ++t) {
                const std::uint8_t* src =
                    layer_input.step_data(t) + static_cast<std::size_t>(r0) * row_bytes;
                std::memcpy(stream.slab.step_data(t), src,
                            row_bytes * static_cast<std::size_t>(r1 - r0));
            }
        }
        stream.spike_count = stream.slab.count();
        streams.push_back(std::move(stream));
    }
    return streams;
}

SpikeTensor merge_streams(const std::vector<SpikeTensor>& tile_outputs,
                          const TilePlan& plan, int steps,
                          TensorShape out_shape) {
    check_plan_covers(plan, out_shape.size());
    if (tile_outputs.size() != plan.tiles.size()) {
        throw PlanMismatch("got " + std::to_string(tile_outputs.size()) +
                           " tile outputs for " +
                           std::to_string(plan.tiles.size()) + " tiles");
    }
    SpikeTensor merged(steps, out_shape);
    for (std::size_t ti = 0; ti < plan.tiles.size(); ++ti) {
        const TileRange& range = plan.tiles[ti];
        const SpikeTensor& tile = tile_outputs[ti];
        if (tile.neurons() != range.size() || tile.steps() != steps) {
            throw PlanMismatch("tile " + std::to_string(ti) +
                               " output does not match its neuron range");
        }
        for (int t = 0; t < steps; ++t) {
            std::memcpy(merged.step_data(t) + range.begin, tile.step_data(t),
                        static_cast<std::size_t>(range.size()));
        }
    }
    return merged;
}

std::vector<SpikeTensor> slice_output(const SpikeTensor& full,
                                      const TilePlan& plan) {
    check_plan_covers(plan, full.neurons());
    std::vector<SpikeTensor> slices;
    slices.reserve(plan.tiles.size());
    for (const TileRange& range : plan.tiles) {
        SpikeTensor slice(full.steps(), TensorShape{1, 1, range.size()});
        for (int t = 0; t < full.steps(); ++t) {
            std::memcpy(slice.step_data(t), full.step_data(t) + range.begin,
                        static_cast<std::size_t>(range.size()));
        }
        slices.push_back(std::move(slice));
    }
    return slices;
}

TiledSchedule build_schedule(const NetworkSpec& net,
                             const std::vector<TilePlan>& plans) {
    if (plans.size() != static_cast<std::size_t>(net.layer_count()) - 1) {
        throw PlanMismatch("expected one plan per non-input layer");
    }
    TiledSchedule schedule;
    for (int li = 1; li < net.layer_count(); ++li) {
        const LayerSpec& layer = net.layer(li);
        const TilePlan& plan = plans[li - 1];
        if (plan.layer_index != li) {
            throw PlanMismatch("plan " + std::to_string(li - 1) +
                               " is for layer " +
                               std::to_string(plan.layer_index));
        }
        check_plan_covers(plan, layer.flat_size());
        const int in_h = net.layer(li - 1).out_shape.h;
        for (std::size_t ti = 0; ti < plan.tiles.size(); ++ti) {
            ScheduleSlot slot;
            slot.layer_index = li;
            slot.tile_index = static_cast<int>(ti);
            slot.out_range = plan.tiles[ti];
            if (layer.kind == LayerKind::Full) {
                slot.full_input = true;
                slot.in_row_begin = 0;
                slot.in_row_end = in_h;
            } else {
                std::tie(slot.in_row_begin, slot.in_row_end) =
                    input_row_window(layer, plan.tiles[ti], in_h);
            }
            schedule.slots.push_back(slot);
        }
    }
    return schedule;
}

std::string format_schedule(const NetworkSpec& net,
                            const std::vector<TilePlan>& plans,
                            const TiledSchedule& schedule) {
    std::string out;
    for (const TilePlan& plan : plans) {
        const LayerSpec& layer = net.layer(plan.layer_index);
        out += "layer " + std::to_string(plan.layer_index) + " " +
               std::string(layer_kind_name(layer.kind)) + " neurons " +
               std::to_string(layer.flat_size()) + " capacity " +
               std::to_string(plan.capacity) + " tiles " +
               std::to_string(plan.tiles.size()) + "\n";
        for (std::size_t ti = 0; ti < plan.tiles.size(); ++ti) {
            out += "  tile " + std::to_string(ti) + " neurons [" +
                   std::to_string(plan.tiles[ti].begin) + "," +
                   std::to_string(plan.tiles[ti].end) + ")\n";
        }
    }
    out += "schedule slots " + std::to_string(schedule.slots.size()) + "\n";
    for (std::size_t si = 0; si < schedule.slots.size(); ++si) {
        const ScheduleSlot& slot = schedule.slots[si];
        out += "  slot " + std::to_string(si) + " layer " +
               std::to_string(slot.layer_index) + " tile " +
               std::to_string(slot.tile_index) + " stream ";
        if (slot.full_input) {
            out += "full\n";
        } else {
            out += "rows [" + std::to_string(slot.in_row_begin) + "," +
                   std::to_string(slot.in_row_end) + ")\n";
        }
    }
    return out;
}

NetworkResult run_tiled(const NetworkSpec& net, const SpikeTensor& input,
                        int capacity, const EngineConfig& cfg,
                        TiledRunStats* stats) {
    if (!(input.shape() == net.input_shape())) {
        throw ShapeMismatch("input tensor does not match the network's input "
                            "layer shape");
    }
    if (net.layer_count() < 2) {
        throw ShapeMismatch("network has no executable layers");
    }
    const std::vector<TilePlan> plans = plan_tiles(net, capacity);

    NetworkResult result;
    if (stats) {
        *stats = TiledRunStats{};
        stats->timesteps = static_cast<std::uint64_t>(input.steps());
    }

    const SpikeTensor* feed = &input;
    for (int li = 1; li < net.layer_count(); ++li) {
        const LayerSpec& layer = net.layer(li);
        const TilePlan& plan = plans[li - 1];
        const LayerWeights* w = layer.trainable() ? &net.weights(li) : nullptr;

        std::vector<TileStream> streams = split_stream(*feed, layer, plan);
        std::vector<SpikeTensor> tile_outputs;
        tile_outputs.reserve(plan.tiles.size());
        for (std::size_t ti = 0; ti < plan.tiles.size(); ++ti) {
            const TileRange& range = plan.tiles[ti];
            const TileStream& stream = streams[ti];
            LifState state = make_lif_state(layer, range.size(), cfg);
            SpikeTensor out(feed->steps(), TensorShape{1, 1, range.size()});
            run_layer_range(layer, w, stream.slab, stream.row_begin,
                            feed->shape().h, range, state, out, cfg);
            if (stats) {
                stats->stream_spikes += stream.spike_count;
                stats->tile_slots += 1;
            }
            tile_outputs.push_back(std::move(out));
        }

        LayerOutput merged;
        merged.spikes = merge_streams(tile_outputs, plan, feed->steps(),
                                      layer.out_shape);
        merged.spike_count = merged.spikes.count();
        if (stats) stats->stream_spikes += merged.spike_count;
        result.layers.push_back(std::move(merged));
        feed = &result.layers.back().spikes;
    }

    const SpikeTensor& out = result.layers.back().spikes;
    result.class_counts.assign(out.neurons(), 0);
    for (int t = 0; t < out.steps(); ++t) {
        for (int k = 0; k < out.neurons(); ++k) {
            result.class_counts[k] += out.flat(t, k);
        }
    }
    result.predicted_class = argmax_class(result.class_counts);
    return result;
}

} // namespace evsnn
