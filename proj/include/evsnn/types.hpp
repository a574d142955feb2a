#ifndef EVSNN_TYPES_HPP
#define EVSNN_TYPES_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsnn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

// Half-open range of flattened neuron indices.
struct TileRange {
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
    bool operator==(const TileRange&) const = default;
};

struct TensorShape {
    int h = 0;
    int w = 0;
    int c = 0;

    int size() const { return h * w * c; }
    bool operator==(const TensorShape&) const = default;
};

// Binary spikes, one per (timestep, y, x, channel). Channel is the
// fastest-varying index; flat neuron index within a step is (y*w + x)*c + ch.
class SpikeTensor {
public:
    SpikeTensor() = default;
    SpikeTensor(int steps, TensorShape shape)
        : steps_(steps), shape_(shape),
          values_(static_cast<std::size_t>(steps) * shape.size(), 0) {}

    int steps() const { return steps_; }
    const TensorShape& shape() const { return shape_; }
    int neurons() const { return shape_.size(); }

    std::uint8_t at(int step, int y, int x, int ch) const {
        return values_[index(step, y, x, ch)];
    }
    void set(int step, int y, int x, int ch, std::uint8_t v) {
        values_[index(step, y, x, ch)] = v;
    }
    std::uint8_t flat(int step, int neuron) const {
        return values_[static_cast<std::size_t>(step) * shape_.size() + neuron];
    }
    void set_flat(int step, int neuron, std::uint8_t v) {
        values_[static_cast<std::size_t>(step) * shape_.size() + neuron] = v;
    }

    const std::uint8_t* step_data(int step) const {
        return values_.data() + static_cast<std::size_t>(step) * shape_.size();
    }
    std::uint8_t* step_data(int step) {
        return values_.data() + static_cast<std::size_t>(step) * shape_.size();
    }

    std::uint64_t count() const {
        std::uint64_t n = 0;
        for (std::uint8_t v : values_) n += v;
        return n;
    }

    bool operator==(const SpikeTensor&) const = default;

private:
    std::size_t index(int step, int y, int x, int ch) const {
        return ((static_cast<std::size_t>(step) * shape_.h + y) * shape_.w + x) *
                   shape_.c + ch;
    }

    int steps_ = 0;
    TensorShape shape_{};
    std::vector<std::uint8_t> values_;
};

} // namespace evsnn

#endif
