#include "evsnn/events.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace evsnn {

namespace {

constexpr std::size_t kBinaryRecordSize = 10;

void check_event(const DvsEvent& ev, const SensorGeometry& sensor,
                 std::size_t record_index) {
    if (ev.x >= sensor.width || ev.y >= sensor.height) {
        throw CoordinateOutOfRange(
            "event " + std::to_string(record_index) + ": coordinate (" +
            std::to_string(ev.x) + "," + std::to_string(ev.y) +
            ") outside sensor " + std::to_string(sensor.width) + "x" +
            std::to_string(sensor.height));
    }
}

std::int64_t parse_field(std::string_view field, std::size_t line_no,
                         const char* name) {
    std::int64_t value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || field.empty()) {
        throw MalformedRecord("line " + std::to_string(line_no) +
                              ": cannot parse " + name + " from '" +
                              std::string(field) + "'");
    }
    if (value < 0) {
        throw MalformedRecord("line " + std::to_string(line_no) + ": " + name +
                              " must be non-negative");
    }
    return value;
}

std::vector<DvsEvent> parse_text(std::string_view bytes, const ParseOptions& opts) {
    std::vector<DvsEvent> events;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        std::size_t eol = bytes.find('\n', pos);
        std::string_view line = bytes.substr(
            pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? bytes.size() : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;

        std::string_view fields[4];
        std::size_t start = 0;
        int n = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (n == 4) {
                    throw MalformedRecord("line " + std::to_string(line_no) +
                                          ": expected 4 fields");
                }
                fields[n++] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (n != 4) {
            throw MalformedRecord("line " + std::to_string(line_no) +
                                  ": expected 4 fields, got " + std::to_string(n));
        }

        DvsEvent ev;
        ev.t_us = parse_field(fields[0], line_no, "timestamp");
        std::int64_t x = parse_field(fields[1], line_no, "x");
        std::int64_t y = parse_field(fields[2], line_no, "y");
        std::int64_t p = parse_field(fields[3], line_no, "polarity");
        if (x > 0xFFFF || y > 0xFFFF) {
            throw CoordinateOutOfRange("line " + std::to_string(line_no) +
                                       ": coordinate exceeds 16-bit range");
        }
        if (p != 0 && p != 1) {
            throw MalformedRecord("line " + std::to_string(line_no) +
                                  ": polarity must be 0 or 1");
        }
        ev.x = static_cast<std::uint16_t>(x);
        ev.y = static_cast<std::uint16_t>(y);
        ev.polarity = static_cast<std::uint8_t>(p);
        check_event(ev, opts.sensor, events.size());
        events.push_back(ev);
    }
    return events;
}

std::vector<DvsEvent> parse_binary(std::string_view bytes, const ParseOptions& opts) {
    if (bytes.size() % kBinaryRecordSize != 0) {
        throw MalformedRecord("binary stream length " +
                              std::to_string(bytes.size()) +
                              " is not a multiple of the 10-byte record size");
    }
    std::vector<DvsEvent> events;
    events.reserve(bytes.size() / kBinaryRecordSize);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t off = 0; off < bytes.size(); off += kBinaryRecordSize) {
        const unsigned char* r = p + off;
        DvsEvent ev;
        ev.t_us = static_cast<std::int64_t>(
            static_cast<std::uint32_t>(r[0]) | (static_cast<std::uint32_t>(r[1]) << 8) |
            (static_cast<std::uint32_t>(r[2]) << 16) |
            (static_cast<std::uint32_t>(r[3]) << 24));
        ev.x = static_cast<std::uint16_t>(r[4] | (r[5] << 8));
        ev.y = static_cast<std::uint16_t>(r[6] | (r[7] << 8));
        ev.polarity = r[8];
        if (ev.polarity > 1) {
            throw MalformedRecord("record " +
                                  std::to_string(off / kBinaryRecordSize) +
                                  ": polarity must be 0 or 1");
        }
        if (r[9] != 0) {
            throw MalformedRecord("record " +
                                  std::to_string(off / kBinaryRecordSize) +
                                  ": reserved byte must be 0");
        }
        check_event(ev, opts.sensor, off / kBinaryRecordSize);
        events.push_back(ev);
    }
    return events;
}

} // namespace

std::vector<DvsEvent> parse_events(std::string_view bytes, EventFormat format,
                                   const ParseOptions& opts) {
    std::vector<DvsEvent> events = format == EventFormat::Text
                                       ? parse_text(bytes, opts)
                                       : parse_binary(bytes, opts);
    if (opts.strict_monotonic) {
        for (std::size_t i = 1; i < events.size(); ++i) {
            if (events[i].t_us < events[i - 1].t_us) {
                throw NonMonotonicTimestamp("event " + std::to_string(i) +
                                            ": timestamp " +
                                            std::to_string(events[i].t_us) +
                                            " decreases");
            }
        }
    }
    return events;
}

std::string serialize_events(std::span<const DvsEvent> events, EventFormat format) {
    std::string out;
    if (format == EventFormat::Text) {
        for (const DvsEvent& ev : events) {
            out += std::to_string(ev.t_us);
            out += ',';
            out += std::to_string(ev.x);
            out += ',';
            out += std::to_string(ev.y);
            out += ',';
            out += std::to_string(static_cast<int>(ev.polarity));
            out += '\n';
        }
    } else {
        out.reserve(events.size() * kBinaryRecordSize);
        for (const DvsEvent& ev : events) {
            if (ev.t_us < 0 || ev.t_us > 0xFFFFFFFFll) {
                throw MalformedRecord("timestamp " + std::to_string(ev.t_us) +
                                      " does not fit the binary u32 field");
            }
            auto t = static_cast<std::uint32_t>(ev.t_us);
            unsigned char r[kBinaryRecordSize] = {
                static_cast<unsigned char>(t & 0xFF),
                static_cast<unsigned char>((t >> 8) & 0xFF),
                static_cast<unsigned char>((t >> 16) & 0xFF),
                static_cast<unsigned char>((t >> 24) & 0xFF),
                static_cast<unsigned char>(ev.x & 0xFF),
                static_cast<unsigned char>(ev.x >> 8),
                static_cast<unsigned char>(ev.y & 0xFF),
                static_cast<unsigned char>(ev.y >> 8),
                ev.polarity,
                0};
            out.append(reinterpret_cast<const char*>(r), kBinaryRecordSize);
        }
    }
    return out;
}

std::vector<DvsEvent> load_events(const std::filesystem::path& path,
                                  EventFormat format, const ParseOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open events file '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_events(ss.str(), format, opts);
}

void save_events(const std::filesystem::path& path,
                 std::span<const DvsEvent> events, EventFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open events file '" + path.string() + "' for writing");
    }
    std::string bytes = serialize_events(events, format);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<EventWindow> window_stream(std::span<const DvsEvent> events,
                                       std::int64_t window_ms,
                                       std::int64_t stride_ms) {
    if (window_ms <= 0) throw InvalidWindow("window_ms must be positive");
    if (stride_ms <= 0) throw InvalidWindow("stride_ms must be positive");
    std::vector<EventWindow> windows;
    if (events.empty()) return windows;

    const std::int64_t window_us = window_ms * 1000;
    const std::int64_t stride_us = stride_ms * 1000;
    const std::int64_t t_min = events.front().t_us;
    const std::int64_t t_max = events.back().t_us;
    const std::int64_t n_windows = (t_max - t_min) / stride_us + 1;

    windows.reserve(static_cast<std::size_t>(n_windows));
    for (std::int64_t k = 0; k < n_windows; ++k) {
        EventWindow win;
        win.start_us = t_min + k * stride_us;
        win.end_us = win.start_us + window_us;
        auto lo = std::lower_bound(events.begin(), events.end(), win.start_us,
                                   [](const DvsEvent& e, std::int64_t t) {
                                       return e.t_us < t;
                                   });
        auto hi = std::lower_bound(events.begin(), events.end(), win.end_us,
                                   [](const DvsEvent& e, std::int64_t t) {
                                       return e.t_us < t;
                                   });
        win.events.assign(lo, hi);
        windows.push_back(std::move(win));
    }
    return windows;
}

SpikeTensor bin_events(const EventWindow& window, std::int64_t timestep_us,
                       TensorShape shape) {
    if (timestep_us <= 0) throw InvalidWindow("timestep_us must be positive");
    if (shape.c != 2) {
        throw ShapeMismatch("DVS input tensors carry 2 polarity channels, got " +
                            std::to_string(shape.c));
    }
    const std::int64_t length_us = window.end_us - window.start_us;
    const int steps =
        static_cast<int>((length_us + timestep_us - 1) / timestep_us);
    SpikeTensor tensor(steps, shape);
    for (const DvsEvent& ev : window.events) {
        if (ev.t_us < window.start_us || ev.t_us >= window.end_us) {
            throw InvalidWindow("event timestamp " + std::to_string(ev.t_us) +
                                " outside window bounds");
        }
        if (ev.x >= shape.w || ev.y >= shape.h) {
            throw ShapeMismatch("event at (" + std::to_string(ev.x) + "," +
                                std::to_string(ev.y) + ") outside tensor shape " +
                                std::to_string(shape.h) + "x" +
                                std::to_string(shape.w));
        }
        const int step = static_cast<int>((ev.t_us - window.start_us) / timestep_us);
        tensor.set(step, ev.y, ev.x, ev.polarity, 1);
    }
    return tensor;
}

} // namespace evsnn
