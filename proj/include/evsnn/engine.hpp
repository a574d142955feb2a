#ifndef EVSNN_ENGINE_HPP
#define EVSNN_ENGINE_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "evsnn/network.hpp"
#include "evsnn/types.hpp"

namespace evsnn {

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

enum class ExecMode { Serial, Parallel };
enum class Arithmetic { Real, FixedPoint };

struct EngineConfig {
    ExecMode exec = ExecMode::Parallel;
    Arithmetic arith = Arithmetic::Real;
    int frac_bits = 12; // fixed-point mode only
};

// Membrane state of one layer (or one tile of a layer). `v` is used in real
// mode, `v_fx` in fixed-point mode; a spiking neuron is hard-reset to zero.
struct LifState {
    std::vector<double> v;
    std::vector<std::int64_t> v_fx;
    double theta = 1.0;
    double lambda = 0.9;
};

LifState make_lif_state(const LayerSpec& layer, int neurons,
                        const EngineConfig& cfg = {});

// One discrete step: vp = lambda * v * (1 - fired_previously) + current,
// spike iff vp >= theta. The reset is folded into the stored state, which is
// already zero wherever the previous step fired. Real mode only.
std::pair<LifState, std::vector<std::uint8_t>> lif_step(
    const LifState& state, std::span<const double> current);

struct LayerOutput {
    SpikeTensor spikes;
    std::uint64_t spike_count = 0;
};

struct NetworkResult {
    std::vector<LayerOutput> layers; // one per non-input layer
    std::vector<std::uint64_t> class_counts;
    int predicted_class = 0;

    const LayerOutput& output_layer() const { return layers.back(); }
};

// Evolves one contiguous range of a layer's output neurons over all
// timesteps. `input` may be a row window of the layer's input plane
// (slab_row0 = first plane row present, in_h = full plane height); dense
// layers always consume the full input. `out` must hold range.size() neurons
// per step; `state` likewise. This is the entry the tiled executor drives.
void run_layer_range(const LayerSpec& layer, const LayerWeights* weights,
                     const SpikeTensor& input, int slab_row0, int in_h,
                     TileRange range, LifState& state, SpikeTensor& out,
                     const EngineConfig& cfg = {});

// Full-layer wrapper over run_layer_range.
LayerOutput run_layer(const LayerSpec& layer, const LayerWeights* weights,
                      const SpikeTensor& input, LifState& state,
                      const EngineConfig& cfg = {});

// Runs all layers over all timesteps with zero-initialized states. The
// predicted class is the output neuron with the highest spike count over the
// window, ties broken toward the lowest index.
NetworkResult run_network(const NetworkSpec& net, const SpikeTensor& input,
                          const EngineConfig& cfg = {});

int argmax_class(std::span<const std::uint64_t> counts);

} // namespace evsnn

#endif
