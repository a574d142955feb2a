#include "evsnn/engine.hpp"

#include <cmath>

#include "evsnn/kernels.hpp"

namespace evsnn {

namespace {

kernels::SpatialGeometry spatial_geometry(const LayerSpec& layer,
                                          const SpikeTensor& input,
                                          int slab_row0, int in_h) {
    kernels::SpatialGeometry g;
    g.in_h = in_h;
    g.in_w = input.shape().w;
    g.in_c = input.shape().c;
    g.slab_row0 = slab_row0;
    g.slab_rows = input.shape().h;
    g.out_w = layer.out_shape.w;
    g.features = layer.out_shape.c;
    g.kernel_h = layer.kernel_h;
    g.kernel_w = layer.kernel_w;
    g.stride = layer.stride;
    g.padding = layer.kind == LayerKind::Conv ? layer.padding : 0;
    return g;
}

std::vector<std::int64_t> to_fixed(std::span<const double> values, int frac_bits) {
    std::vector<std::int64_t> out(values.size());
    const double scale = static_cast<double>(std::int64_t{1} << frac_bits);
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::llround(values[i] * scale);
    }
    return out;
}

} // namespace

LifState make_lif_state(const LayerSpec& layer, int neurons,
                        const EngineConfig& cfg) {
    LifState state;
    state.theta = layer.theta;
    state.lambda = layer.lambda;
    if (cfg.arith == Arithmetic::FixedPoint) {
        state.v_fx.assign(neurons, 0);
    } else {
        state.v.assign(neurons, 0.0);
    }
    return state;
}

std::pair<LifState, std::vector<std::uint8_t>> lif_step(
    const LifState& state, std::span<const double> current) {
    if (current.size() != state.v.size()) {
        throw DimensionMismatch("input current has " +
                                std::to_string(current.size()) +
                                " entries for " + std::to_string(state.v.size()) +
                                " neurons");
    }
    LifState next = state;
    std::vector<std::uint8_t> spikes(state.v.size(), 0);
    kernels::lif_update_serial(next.v.data(), current.data(), state.theta,
                               state.lambda, static_cast<int>(current.size()),
                               spikes.data());
    return {std::move(next), std::move(spikes)};
}

void run_layer_range(const LayerSpec& layer, const LayerWeights* weights,
                     const SpikeTensor& input, int slab_row0, int in_h,
                     TileRange range, LifState& state, SpikeTensor& out,
                     const EngineConfig& cfg) {
    const int len = range.size();
    if (out.neurons() != len || out.steps() != input.steps()) {
        throw ShapeMismatch("output tensor does not match the neuron range");
    }
    const bool parallel = cfg.exec == ExecMode::Parallel;
    const bool fixed = cfg.arith == Arithmetic::FixedPoint;
    if (layer.trainable() && (weights == nullptr || weights->real.empty())) {
        throw ShapeMismatch("layer " + std::to_string(layer.index) +
                            " needs weights");
    }
    if ((fixed ? state.v_fx.size() : state.v.size()) !=
        static_cast<std::size_t>(len)) {
        throw DimensionMismatch("state size does not match the neuron range");
    }

    kernels::SpatialGeometry geom;
    if (layer.kind == LayerKind::Conv || layer.kind == LayerKind::Pool) {
        geom = spatial_geometry(layer, input, slab_row0, in_h);
    }

    std::vector<double> current;
    std::vector<std::int64_t> current_fx;
    std::vector<std::int64_t> weights_fx;
    std::int64_t theta_fx = 0, lambda_fx = 0, one_fx = 0;
    if (fixed) {
        current_fx.resize(len);
        if (layer.trainable()) weights_fx = to_fixed(weights->real, cfg.frac_bits);
        const double scale = static_cast<double>(std::int64_t{1} << cfg.frac_bits);
        theta_fx = std::llround(layer.theta * scale);
        lambda_fx = std::llround(layer.lambda * scale);
        one_fx = std::int64_t{1} << cfg.frac_bits;
    } else {
        current.resize(len);
    }

    for (int t = 0; t < input.steps(); ++t) {
        const std::uint8_t* slab = input.step_data(t);
        switch (layer.kind) {
        case LayerKind::Conv:
            if (fixed) {
                (parallel ? kernels::conv_current_fx_parallel
                          : kernels::conv_current_fx_serial)(
                    slab, geom, weights_fx.data(), range.begin, range.end,
                    current_fx.data());
            } else {
                (parallel ? kernels::conv_current_parallel
                          : kernels::conv_current_serial)(
                    slab, geom, weights->real.data(), range.begin, range.end,
                    current.data());
            }
            break;
        case LayerKind::Pool:
            if (fixed) {
                (parallel ? kernels::pool_current_fx_parallel
                          : kernels::pool_current_fx_serial)(
                    slab, geom, range.begin, range.end, current_fx.data(), one_fx);
            } else {
                (parallel ? kernels::pool_current_parallel
                          : kernels::pool_current_serial)(
                    slab, geom, range.begin, range.end, current.data());
            }
            break;
        case LayerKind::Full:
            if (fixed) {
                (parallel ? kernels::full_current_fx_parallel
                          : kernels::full_current_fx_serial)(
                    slab, input.neurons(), weights_fx.data(), range.begin,
                    range.end, current_fx.data());
            } else {
                (parallel ? kernels::full_current_parallel
                          : kernels::full_current_serial)(
                    slab, input.neurons(), weights->real.data(), range.begin,
                    range.end, current.data());
            }
            break;
        case LayerKind::Input:
            throw ShapeMismatch("input layers are not executable");
        }

        std::uint8_t* spikes = out.step_data(t);
        if (fixed) {
            (parallel ? kernels::lif_update_fx_parallel
                      : kernels::lif_update_fx_serial)(
                state.v_fx.data(), current_fx.data(), theta_fx, lambda_fx,
                cfg.frac_bits, len, spikes);
        } else {
            (parallel ? kernels::lif_update_parallel
                      : kernels::lif_update_serial)(
                state.v.data(), current.data(), state.theta, state.lambda, len,
                spikes);
        }
    }
}

LayerOutput run_layer(const LayerSpec& layer, const LayerWeights* weights,
                      const SpikeTensor& input, LifState& state,
                      const EngineConfig& cfg) {
    if (layer.kind == LayerKind::Conv || layer.kind == LayerKind::Pool) {
        const TensorShape inferred = infer_shape(input.shape(), layer);
        if (!(inferred == layer.out_shape)) {
            throw ShapeMismatch("layer " + std::to_string(layer.index) +
                                ": input shape does not produce the declared "
                                "output shape");
        }
    } else if (layer.kind == LayerKind::Full && weights != nullptr) {
        if (weights->real.size() != static_cast<std::size_t>(layer.features) *
                                        input.neurons()) {
            throw ShapeMismatch("layer " + std::to_string(layer.index) +
                                ": weight count does not match the input size");
        }
    }
    LayerOutput out;
    out.spikes = SpikeTensor(input.steps(), layer.out_shape);
    run_layer_range(layer, weights, input, 0, input.shape().h,
                    TileRange{0, layer.flat_size()}, state, out.spikes, cfg);
    out.spike_count = out.spikes.count();
    return out;
}

NetworkResult run_network(const NetworkSpec& net, const SpikeTensor& input,
                          const EngineConfig& cfg) {
    if (!(input.shape() == net.input_shape())) {
        throw ShapeMismatch("input tensor does not match the network's input "
                            "layer shape");
    }
    if (net.layer_count() < 2) {
        throw ShapeMismatch("network has no executable layers");
    }
    NetworkResult result;
    const SpikeTensor* feed = &input;
    for (int li = 1; li < net.layer_count(); ++li) {
        const LayerSpec& layer = net.layer(li);
        LifState state = make_lif_state(layer, layer.flat_size(), cfg);
        const LayerWeights* w = layer.trainable() ? &net.weights(li) : nullptr;
        result.layers.push_back(run_layer(layer, w, *feed, state, cfg));
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

int argmax_class(std::span<const std::uint64_t> counts) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(counts.size()); ++k) {
        if (counts[k] > counts[best]) best = k;
    }
    return best;
}

} // namespace evsnn
