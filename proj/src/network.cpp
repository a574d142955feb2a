#include "evsnn/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace evsnn {

namespace {

struct Token {
    std::string_view text;
    int column; // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i >= line.size()) break;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        tokens.push_back({line.substr(start, i - start), static_cast<int>(start + 1)});
    }
    return tokens;
}

long long parse_int(std::string_view text, int line, int col, const char* name) {
    long long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw SyntaxError(line, col, std::string("cannot parse ") + name +
                                         " from '" + std::string(text) + "'");
    }
    return value;
}

double parse_real(std::string_view text, int line, int col, const char* name) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw SyntaxError(line, col, std::string("cannot parse ") + name +
                                         " from '" + std::string(text) + "'");
    }
    return value;
}

std::string format_real(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// "HxWxC" -> shape, or a bare "N" -> (1,1,N)
TensorShape parse_size(std::string_view text, int line, int col, bool* flat) {
    int dims[3];
    int n = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == 'x') {
            if (n == 3) throw SyntaxError(line, col, "size has too many dimensions");
            long long v = parse_int(text.substr(start, i - start), line, col, "size");
            if (v <= 0) throw SyntaxError(line, col, "size dimensions must be positive");
            dims[n++] = static_cast<int>(v);
            start = i + 1;
        }
    }
    if (n == 1) {
        if (flat) *flat = true;
        return TensorShape{1, 1, dims[0]};
    }
    if (n == 3) {
        if (flat) *flat = false;
        return TensorShape{dims[0], dims[1], dims[2]};
    }
    throw SyntaxError(line, col, "size must be HxWxC or a flat count");
}

std::pair<int, int> parse_kernel(std::string_view text, int line, int col) {
    std::size_t sep = text.find('x');
    if (sep == std::string_view::npos) {
        throw SyntaxError(line, col, "kernel must be KhxKw");
    }
    long long kh = parse_int(text.substr(0, sep), line, col, "kernel");
    long long kw = parse_int(text.substr(sep + 1), line, col, "kernel");
    if (kh <= 0 || kw <= 0) throw SyntaxError(line, col, "kernel must be positive");
    return {static_cast<int>(kh), static_cast<int>(kw)};
}

void write_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void write_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

struct ByteReader {
    const unsigned char* p;
    std::size_t size;
    std::size_t off = 0;

    bool done() const { return off >= size; }
    bool read_u32(std::uint32_t& v) {
        if (off + 4 > size) return false;
        v = static_cast<std::uint32_t>(p[off]) |
            (static_cast<std::uint32_t>(p[off + 1]) << 8) |
            (static_cast<std::uint32_t>(p[off + 2]) << 16) |
            (static_cast<std::uint32_t>(p[off + 3]) << 24);
        off += 4;
        return true;
    }
    bool read_f32(float& v) {
        std::uint32_t bits;
        if (!read_u32(bits)) return false;
        std::memcpy(&v, &bits, 4);
        return true;
    }
};

} // namespace

std::string_view layer_kind_name(LayerKind kind) {
    switch (kind) {
    case LayerKind::Input: return "input";
    case LayerKind::Pool: return "pool";
    case LayerKind::Conv: return "conv";
    case LayerKind::Full: return "full";
    }
    return "?";
}

void LayerWeights::requantize() {
    double max_abs = 0.0;
    for (double v : real) max_abs = std::max(max_abs, std::fabs(v));
    scale = max_abs > 0.0 ? static_cast<float>(max_abs / 127.0) : 1.0f;
    q.resize(real.size());
    for (std::size_t i = 0; i < real.size(); ++i) {
        long long qi = std::llround(real[i] / static_cast<double>(scale));
        q[i] = static_cast<std::int8_t>(std::clamp<long long>(qi, -127, 127));
    }
    modified = false;
}

TensorShape infer_shape(const TensorShape& prev, const LayerSpec& layer) {
    switch (layer.kind) {
    case LayerKind::Input:
        throw IncompatibleShape("input layers have no predecessor");
    case LayerKind::Pool:
    case LayerKind::Conv: {
        const int pad = layer.kind == LayerKind::Pool ? 0 : layer.padding;
        if (layer.kernel_h <= 0 || layer.kernel_w <= 0) {
            throw IncompatibleShape("layer " + std::to_string(layer.index) +
                                    ": kernel not set");
        }
        if (layer.stride <= 0) {
            throw IncompatibleShape("layer " + std::to_string(layer.index) +
                                    ": stride must be positive");
        }
        const int eff_h = prev.h + 2 * pad;
        const int eff_w = prev.w + 2 * pad;
        if (layer.kernel_h > eff_h || layer.kernel_w > eff_w) {
            throw IncompatibleShape("layer " + std::to_string(layer.index) +
                                    ": kernel larger than padded input");
        }
        const int out_h = (eff_h - layer.kernel_h) / layer.stride + 1;
        const int out_w = (eff_w - layer.kernel_w) / layer.stride + 1;
        const int out_c = layer.kind == LayerKind::Pool ? prev.c : layer.features;
        if (out_c <= 0) {
            throw IncompatibleShape("layer " + std::to_string(layer.index) +
                                    ": feature count must be positive");
        }
        return TensorShape{out_h, out_w, out_c};
    }
    case LayerKind::Full:
        if (layer.features <= 0) {
            throw IncompatibleShape("layer " + std::to_string(layer.index) +
                                    ": feature count must be positive");
        }
        return TensorShape{1, 1, layer.features};
    }
    throw IncompatibleShape("unknown layer kind");
}

std::size_t expected_weight_count(const TensorShape& prev, const LayerSpec& layer) {
    switch (layer.kind) {
    case LayerKind::Conv:
        return static_cast<std::size_t>(layer.features) * layer.kernel_h *
               layer.kernel_w * prev.c;
    case LayerKind::Full:
        return static_cast<std::size_t>(layer.features) * prev.size();
    default:
        return 0;
    }
}

void NetworkSpec::append_layer(const LayerSpec& layer) {
    if (layers_.empty()) {
        if (layer.kind != LayerKind::Input) {
            throw ShapeError("layer 0 must be an input layer");
        }
        if (layer.out_shape.size() <= 0) {
            throw ShapeError("input layer needs a positive size");
        }
    } else {
        if (layer.kind == LayerKind::Input) {
            throw ShapeError("layer " + std::to_string(layer.index) +
                             ": input layers are only allowed at index 0");
        }
        const TensorShape prev = layers_.back().out_shape;
        if (layers_.back().kind == LayerKind::Full && layer.kind != LayerKind::Full) {
            throw ShapeError("layer " + std::to_string(layer.index) +
                             ": spatial layers cannot follow a full layer");
        }
        const TensorShape inferred = infer_shape(prev, layer);
        if (!(inferred == layer.out_shape)) {
            throw ShapeError(
                "layer " + std::to_string(layer.index) + ": declared size " +
                std::to_string(layer.out_shape.h) + "x" +
                std::to_string(layer.out_shape.w) + "x" +
                std::to_string(layer.out_shape.c) + " but inferred " +
                std::to_string(inferred.h) + "x" + std::to_string(inferred.w) +
                "x" + std::to_string(inferred.c));
        }
    }
    if (layer.theta <= 0.0) {
        throw ShapeError("layer " + std::to_string(layer.index) +
                         ": theta must be positive");
    }
    if (layer.lambda < 0.0 || layer.lambda > 1.0) {
        throw ShapeError("layer " + std::to_string(layer.index) +
                         ": lambda must be within [0, 1]");
    }

    LayerWeights weights;
    if (layer.trainable()) {
        const std::size_t count =
            expected_weight_count(layers_.back().out_shape, layer);
        weights.q.assign(count, 0);
        weights.scale = 1.0f;
        weights.dequantize();
    }
    layers_.push_back(layer);
    weights_.push_back(std::move(weights));
}

NetworkSpec NetworkSpec::parse(std::string_view text,
                               const std::filesystem::path& base_dir) {
    NetworkSpec spec;
    std::string weight_file;
    int weight_line = 0;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(
            pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        std::size_t comment = line.find('#');
        if (comment != std::string_view::npos) line = line.substr(0, comment);

        std::vector<Token> tokens = tokenize(line);
        if (!tokens.empty()) {
            if (tokens[0].text == "weights") {
                if (tokens.size() != 2) {
                    throw SyntaxError(line_no, tokens[0].column,
                                      "weights line needs exactly one path");
                }
                if (!weight_file.empty()) {
                    throw SyntaxError(line_no, tokens[0].column,
                                      "duplicate weights line");
                }
                weight_file = std::string(tokens[1].text);
                weight_line = line_no;
            } else if (tokens[0].text == "layer") {
                if (tokens.size() < 3) {
                    throw SyntaxError(line_no, tokens[0].column,
                                      "layer line needs an index and a kind");
                }
                LayerSpec layer;
                layer.index = static_cast<int>(
                    parse_int(tokens[1].text, line_no, tokens[1].column, "layer index"));
                if (layer.index != spec.layer_count()) {
                    throw SyntaxError(line_no, tokens[1].column,
                                      "expected layer index " +
                                          std::to_string(spec.layer_count()));
                }
                const std::string_view kind = tokens[2].text;
                if (kind == "input") layer.kind = LayerKind::Input;
                else if (kind == "pool") layer.kind = LayerKind::Pool;
                else if (kind == "conv") layer.kind = LayerKind::Conv;
                else if (kind == "full") layer.kind = LayerKind::Full;
                else {
                    throw SyntaxError(line_no, tokens[2].column,
                                      "unknown layer kind '" + std::string(kind) + "'");
                }

                bool have_size = false, have_kernel = false, have_features = false;
                bool have_stride = false, have_padding = false;
                bool have_theta = false, have_lambda = false;
                bool flat = false;
                for (std::size_t i = 3; i < tokens.size(); ++i) {
                    const Token& tok = tokens[i];
                    std::size_t eq = tok.text.find('=');
                    if (eq == std::string_view::npos) {
                        throw SyntaxError(line_no, tok.column,
                                          "expected key=value, got '" +
                                              std::string(tok.text) + "'");
                    }
                    std::string_view key = tok.text.substr(0, eq);
                    std::string_view value = tok.text.substr(eq + 1);
                    const int vcol = tok.column + static_cast<int>(eq) + 1;
                    auto once = [&](bool& seen) {
                        if (seen) {
                            throw SyntaxError(line_no, tok.column,
                                              "duplicate parameter '" +
                                                  std::string(key) + "'");
                        }
                        seen = true;
                    };
                    if (key == "size") {
                        once(have_size);
                        layer.out_shape = parse_size(value, line_no, vcol, &flat);
                    } else if (key == "kernel") {
                        once(have_kernel);
                        std::tie(layer.kernel_h, layer.kernel_w) =
                            parse_kernel(value, line_no, vcol);
                    } else if (key == "features") {
                        once(have_features);
                        layer.features = static_cast<int>(
                            parse_int(value, line_no, vcol, "features"));
                    } else if (key == "stride") {
                        once(have_stride);
                        layer.stride =
                            static_cast<int>(parse_int(value, line_no, vcol, "stride"));
                    } else if (key == "padding") {
                        once(have_padding);
                        layer.padding =
                            static_cast<int>(parse_int(value, line_no, vcol, "padding"));
                        if (layer.padding < 0) {
                            throw SyntaxError(line_no, vcol,
                                              "padding must be non-negative");
                        }
                    } else if (key == "theta") {
                        once(have_theta);
                        layer.theta = parse_real(value, line_no, vcol, "theta");
                    } else if (key == "lambda") {
                        once(have_lambda);
                        layer.lambda = parse_real(value, line_no, vcol, "lambda");
                    } else {
                        throw SyntaxError(line_no, tok.column,
                                          "unknown parameter '" + std::string(key) +
                                              "'");
                    }
                }
                if (!have_size) {
                    throw SyntaxError(line_no, tokens[0].column,
                                      "layer line needs size=");
                }

                auto forbid = [&](bool seen, const char* what) {
                    if (seen) {
                        throw SyntaxError(line_no, tokens[2].column,
                                          std::string(layer_kind_name(layer.kind)) +
                                              " layers do not take " + what);
                    }
                };
                switch (layer.kind) {
                case LayerKind::Input:
                    forbid(have_kernel, "kernel=");
                    forbid(have_features, "features=");
                    forbid(have_stride, "stride=");
                    forbid(have_padding, "padding=");
                    forbid(have_theta, "theta=");
                    forbid(have_lambda, "lambda=");
                    break;
                case LayerKind::Pool:
                    if (!have_kernel) {
                        throw SyntaxError(line_no, tokens[0].column,
                                          "pool layers need kernel=");
                    }
                    forbid(have_padding, "padding=");
                    // OR-pooling is a fixed unit-weight LIF: theta 1, lambda 0.
                    forbid(have_theta, "theta=");
                    forbid(have_lambda, "lambda=");
                    layer.theta = 1.0;
                    layer.lambda = 0.0;
                    if (!have_features) layer.features = layer.out_shape.c;
                    break;
                case LayerKind::Conv:
                    if (!have_kernel) {
                        throw SyntaxError(line_no, tokens[0].column,
                                          "conv layers need kernel=");
                    }
                    if (!have_features) {
                        throw SyntaxError(line_no, tokens[0].column,
                                          "conv layers need features=");
                    }
                    break;
                case LayerKind::Full:
                    forbid(have_kernel, "kernel=");
                    forbid(have_stride, "stride=");
                    forbid(have_padding, "padding=");
                    if (!flat) {
                        throw SyntaxError(line_no, tokens[0].column,
                                          "full layers take a flat size");
                    }
                    if (have_features && layer.features != layer.out_shape.c) {
                        throw SyntaxError(line_no, tokens[0].column,
                                          "features= disagrees with size=");
                    }
                    layer.features = layer.out_shape.c;
                    break;
                }
                spec.append_layer(layer);
            } else {
                throw SyntaxError(line_no, tokens[0].column,
                                  "expected 'layer' or 'weights', got '" +
                                      std::string(tokens[0].text) + "'");
            }
        }

        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }

    if (spec.layers_.empty()) {
        throw SyntaxError(line_no, 1, "configuration declares no layers");
    }
    if (!weight_file.empty()) {
        spec.weight_path_ = weight_file;
        std::filesystem::path resolved = weight_file;
        if (resolved.is_relative() && !base_dir.empty()) {
            resolved = base_dir / resolved;
        }
        try {
            spec.load_weights(resolved);
        } catch (const MissingWeights& e) {
            throw MissingWeights(std::string(e.what()) + " (referenced at line " +
                                 std::to_string(weight_line) + ")");
        }
    }
    return spec;
}

NetworkSpec NetworkSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open network config '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.parent_path());
}

std::string NetworkSpec::emit() const {
    std::string out;
    if (!weight_path_.empty()) {
        out += "weights " + weight_path_.string() + "\n";
    }
    for (const LayerSpec& layer : layers_) {
        out += "layer " + std::to_string(layer.index) + " " +
               std::string(layer_kind_name(layer.kind));
        if (layer.kind == LayerKind::Full) {
            out += " size=" + std::to_string(layer.flat_size());
        } else {
            out += " size=" + std::to_string(layer.out_shape.h) + "x" +
                   std::to_string(layer.out_shape.w) + "x" +
                   std::to_string(layer.out_shape.c);
        }
        if (layer.kind == LayerKind::Pool || layer.kind == LayerKind::Conv) {
            out += " kernel=" + std::to_string(layer.kernel_h) + "x" +
                   std::to_string(layer.kernel_w);
            if (layer.kind == LayerKind::Conv) {
                out += " features=" + std::to_string(layer.features);
            }
            out += " stride=" + std::to_string(layer.stride);
            if (layer.kind == LayerKind::Conv) {
                out += " padding=" + std::to_string(layer.padding);
            }
        }
        if (layer.kind == LayerKind::Conv || layer.kind == LayerKind::Full) {
            out += " theta=" + format_real(layer.theta);
            out += " lambda=" + format_real(layer.lambda);
        }
        out += "\n";
    }
    return out;
}

void NetworkSpec::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot open network config '" + path.string() +
                    "' for writing");
    }
    out << emit();
}

void NetworkSpec::load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingWeights("cannot open weight file '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    ByteReader reader{reinterpret_cast<const unsigned char*>(bytes.data()),
                      bytes.size()};

    for (int li = 0; li < layer_count(); ++li) {
        if (!layers_[li].trainable()) continue;
        std::uint32_t index = 0, count = 0;
        float scale = 0.0f;
        if (!reader.read_u32(index)) {
            throw MissingWeights("weight file '" + path.string() +
                                 "' has no block for layer " + std::to_string(li));
        }
        if (!reader.read_u32(count) || !reader.read_f32(scale)) {
            throw MalformedWeights("weight file '" + path.string() +
                                   "': truncated block header");
        }
        if (static_cast<int>(index) != li) {
            throw MalformedWeights("weight file '" + path.string() +
                                   "': expected block for layer " +
                                   std::to_string(li) + ", found layer " +
                                   std::to_string(index));
        }
        const std::size_t expected =
            expected_weight_count(layers_[li - 1].out_shape, layers_[li]);
        if (count != expected) {
            throw MalformedWeights(
                "weight file '" + path.string() + "': layer " + std::to_string(li) +
                " carries " + std::to_string(count) + " values, expected " +
                std::to_string(expected));
        }
        if (!(scale > 0.0f) || !std::isfinite(scale)) {
            throw MalformedWeights("weight file '" + path.string() + "': layer " +
                                   std::to_string(li) + " scale must be positive");
        }
        if (reader.off + count > reader.size) {
            throw MalformedWeights("weight file '" + path.string() +
                                   "': truncated values for layer " +
                                   std::to_string(li));
        }
        LayerWeights& w = weights_[li];
        w.q.resize(count);
        std::memcpy(w.q.data(), reader.p + reader.off, count);
        reader.off += count;
        w.scale = scale;
        w.modified = false;
        w.dequantize();
    }
    if (!reader.done()) {
        throw MalformedWeights("weight file '" + path.string() +
                               "' has trailing bytes after the last block");
    }
}

void NetworkSpec::save_weights(const std::filesystem::path& path) const {
    std::string out;
    for (int li = 0; li < layer_count(); ++li) {
        if (!layers_[li].trainable()) continue;
        const LayerWeights& w = weights_[li];
        LayerWeights snapshot;
        const LayerWeights* block = &w;
        if (w.modified) {
            snapshot = w;
            snapshot.requantize();
            block = &snapshot;
        }
        write_u32(out, static_cast<std::uint32_t>(li));
        write_u32(out, static_cast<std::uint32_t>(block->q.size()));
        write_f32(out, block->scale);
        out.append(reinterpret_cast<const char*>(block->q.data()), block->q.size());
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw Error("cannot open weight file '" + path.string() + "' for writing");
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

void NetworkSpec::set_layer_weights(int layer, std::vector<double> real) {
    const LayerSpec& spec = layers_.at(layer);
    if (!spec.trainable()) {
        throw Error("layer " + std::to_string(layer) + " carries no weights");
    }
    const std::size_t expected =
        expected_weight_count(layers_.at(layer - 1).out_shape, spec);
    if (real.size() != expected) {
        throw IncompatibleShape("layer " + std::to_string(layer) + " expects " +
                                std::to_string(expected) + " weights, got " +
                                std::to_string(real.size()));
    }
    weights_[layer].real = std::move(real);
    weights_[layer].modified = true;
}

void NetworkSpec::set_neuron_params(int layer, double theta, double lambda) {
    if (theta <= 0.0) throw Error("theta must be positive");
    if (lambda < 0.0 || lambda > 1.0) throw Error("lambda must be within [0, 1]");
    layers_.at(layer).theta = theta;
    layers_.at(layer).lambda = lambda;
}

bool NetworkSpec::operator==(const NetworkSpec& other) const {
    if (layers_ != other.layers_) return false;
    if (weights_.size() != other.weights_.size()) return false;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (weights_[i].q != other.weights_[i].q) return false;
        if (weights_[i].scale != other.weights_[i].scale) return false;
        if (weights_[i].real != other.weights_[i].real) return false;
    }
    return true;
}

std::string reference_network_config() {
    return "# DVS gesture network, 128x128 sensor, 11 classes\n"
           "layer 0 input size=128x128x2\n"
           "layer 1 pool size=32x32x2 kernel=4x4 stride=4\n"
           "layer 2 conv size=32x32x16 kernel=3x3 features=16 stride=1 padding=1\n"
           "layer 3 pool size=16x16x16 kernel=2x2 stride=2\n"
           "layer 4 conv size=16x16x32 kernel=3x3 features=32 stride=1 padding=1\n"
           "layer 5 pool size=8x8x32 kernel=2x2 stride=2\n"
           "layer 6 full size=512\n"
           "layer 7 full size=11\n";
}

} // namespace evsnn
