#ifndef EVSNN_NETWORK_HPP
#define EVSNN_NETWORK_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evsnn/types.hpp"

namespace evsnn {

class SyntaxError : public Error {
public:
    SyntaxError(int line, int column, const std::string& what)
        : Error("line " + std::to_string(line) + ", column " +
                std::to_string(column) + ": " + what),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};
class MissingWeights : public Error {
public:
    using Error::Error;
};
class MalformedWeights : public Error {
public:
    using Error::Error;
};
class IncompatibleShape : public Error {
public:
    using Error::Error;
};

enum class LayerKind { Input, Pool, Conv, Full };

std::string_view layer_kind_name(LayerKind kind);

struct LayerSpec {
    int index = 0;
    LayerKind kind = LayerKind::Input;
    TensorShape out_shape{};   // Full layers use (1, 1, n)
    int kernel_h = 0;
    int kernel_w = 0;
    int features = 0;          // output channels (Conv), units (Full), channels (Pool)
    int stride = 1;
    int padding = 0;           // Conv only
    double theta = 1.0;
    double lambda = 0.9;

    int flat_size() const { return out_shape.size(); }
    bool trainable() const {
        return kind == LayerKind::Conv || kind == LayerKind::Full;
    }
    bool operator==(const LayerSpec&) const = default;
};

// Signed 8-bit weights with a per-layer scale. The engine and trainer work on
// the dequantized `real` values; `q`/`scale` are the serialized form and are
// re-emitted verbatim as long as `real` has not been modified.
struct LayerWeights {
    std::vector<std::int8_t> q;
    float scale = 1.0f;
    std::vector<double> real;
    bool modified = false;

    void dequantize() {
        real.resize(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            real[i] = static_cast<double>(q[i]) * static_cast<double>(scale);
        }
    }
    void requantize();
};

// out = floor((in + 2*padding - kernel)/stride) + 1 per spatial dimension.
// Pool preserves channels and uses padding 0; Full returns (1, 1, features)
// after checking the flattened predecessor size.
TensorShape infer_shape(const TensorShape& prev, const LayerSpec& layer);

// Number of weight elements a trainable layer carries.
// Conv: features * kh * kw * in_c, laid out feature-major, then (ky, kx, c).
// Full: features * flattened-input, input index fastest.
std::size_t expected_weight_count(const TensorShape& prev, const LayerSpec& layer);

class NetworkSpec {
public:
    static NetworkSpec parse(std::string_view text,
                             const std::filesystem::path& base_dir = {});
    static NetworkSpec load(const std::filesystem::path& path);

    std::string emit() const;
    void save(const std::filesystem::path& path) const;

    void load_weights(const std::filesystem::path& path);
    void save_weights(const std::filesystem::path& path) const;

    const std::vector<LayerSpec>& layers() const { return layers_; }
    const LayerSpec& layer(int i) const { return layers_.at(i); }
    int layer_count() const { return static_cast<int>(layers_.size()); }
    const TensorShape& input_shape() const { return layers_.front().out_shape; }
    int output_classes() const { return layers_.back().flat_size(); }

    const LayerWeights& weights(int layer) const { return weights_.at(layer); }
    LayerWeights& weights(int layer) { return weights_.at(layer); }

    void set_layer_weights(int layer, std::vector<double> real);
    void set_neuron_params(int layer, double theta, double lambda);

    const std::filesystem::path& weight_path() const { return weight_path_; }

    // Appends a validated layer; shape inference must agree with declared.
    void append_layer(const LayerSpec& layer);

    bool operator==(const NetworkSpec& other) const;

private:
    std::vector<LayerSpec> layers_;
    std::vector<LayerWeights> weights_;  // indexed like layers_, empty for untrainable
    std::filesystem::path weight_path_;
};

// The 8-row gesture network; weights zero-initialized.
std::string reference_network_config();

} // namespace evsnn

#endif
