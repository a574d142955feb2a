#ifndef EVSNN_EVENTS_HPP
#define EVSNN_EVENTS_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evsnn/types.hpp"

namespace evsnn {

class MalformedRecord : public Error {
public:
    using Error::Error;
};
class CoordinateOutOfRange : public Error {
public:
    using Error::Error;
};
class NonMonotonicTimestamp : public Error {
public:
    using Error::Error;
};
class InvalidWindow : public Error {
public:
    using Error::Error;
};

// One camera event: timestamp in microseconds since recording start, pixel
// position and the sign of the brightness change (0 = OFF, 1 = ON).
struct DvsEvent {
    std::int64_t t_us = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::uint8_t polarity = 0;

    bool operator==(const DvsEvent&) const = default;
};

enum class EventFormat { Text, Binary };

struct SensorGeometry {
    int width = 128;
    int height = 128;
};

struct ParseOptions {
    SensorGeometry sensor{};
    // Reject streams whose timestamps decrease. Off by default; most
    // recordings are already sorted and re-sorting is the caller's call.
    bool strict_monotonic = false;
};

// Text format: one "t_us,x,y,p" line per event, '#' lines are comments.
// Binary format: little-endian 10-byte records
//   u32 t_us | u16 x | u16 y | u8 polarity | u8 reserved(=0)
std::vector<DvsEvent> parse_events(std::string_view bytes, EventFormat format,
                                   const ParseOptions& opts = {});
std::string serialize_events(std::span<const DvsEvent> events, EventFormat format);

std::vector<DvsEvent> load_events(const std::filesystem::path& path,
                                  EventFormat format, const ParseOptions& opts = {});
void save_events(const std::filesystem::path& path,
                 std::span<const DvsEvent> events, EventFormat format);

struct EventWindow {
    std::vector<DvsEvent> events;
    std::int64_t start_us = 0;
    std::int64_t end_us = 0;
};

// Slices a sorted stream into fixed-length windows anchored at the first
// event. Windows advance by stride_ms; overlap is permitted when
// stride_ms < window_ms. An empty stream yields zero windows.
std::vector<EventWindow> window_stream(std::span<const DvsEvent> events,
                                       std::int64_t window_ms = 300,
                                       std::int64_t stride_ms = 300);

// Dense time binning: cell (step, y, x, polarity) is 1 iff at least one
// matching event fell into that timestep. steps = ceil(window_len / timestep).
SpikeTensor bin_events(const EventWindow& window, std::int64_t timestep_us,
                       TensorShape shape);

} // namespace evsnn

#endif
