#include "sdd/events.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>

#include "sdd/errors.hpp"

namespace sdd {

namespace {

constexpr char kBinMagic[4] = {'E', 'V', 'S', '1'};

// Splits a line on commas and parses each field as an integer of type I.
template <typename I>
I parse_int(std::string_view field, long line) {
    I value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw ParseError("invalid integer field '" + std::string(field) + "'", line);
    }
    return value;
}

std::vector<std::string_view> split_csv(std::string_view line, size_t expected, long line_no) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    if (out.size() != expected) {
        throw ParseError("expected " + std::to_string(expected) + " fields, got " +
                             std::to_string(out.size()),
                         line_no);
    }
    return out;
}

void check_event_bounds(const Event& e, uint32_t w, uint32_t h, long line) {
    if (e.x >= w || e.y >= h) {
        throw BoundsError("event at t=" + std::to_string(e.t_us) + " has coordinates (" +
                          std::to_string(e.x) + "," + std::to_string(e.y) +
                          ") outside geometry " + std::to_string(w) + "x" + std::to_string(h) +
                          (line >= 0 ? " (line " + std::to_string(line) + ")" : ""));
    }
    if (e.t_us < 0) throw ParseError("negative timestamp", line);
    if (e.p > 1) throw ParseError("polarity must be 0 or 1", line);
}

void finalize_stream(EventStream& s) {
    if (!s.is_sorted()) {
        std::stable_sort(s.events.begin(), s.events.end(),
                         [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
        s.sort_warning = true;
    }
    if (!s.events.empty() &&
        static_cast<uint64_t>(s.events.back().t_us) > s.duration_us) {
        throw ParseError("declared duration " + std::to_string(s.duration_us) +
                         " us is less than last event timestamp " +
                         std::to_string(s.events.back().t_us));
    }
}

EventStream read_events_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    EventStream s;
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw ParseError("missing header", 1);
    line_no = 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_csv(line, 3, line_no);
    s.width = parse_int<uint32_t>(header[0], line_no);
    s.height = parse_int<uint32_t>(header[1], line_no);
    s.duration_us = parse_int<uint64_t>(header[2], line_no);

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv(line, 4, line_no);
        Event e;
        e.t_us = parse_int<int64_t>(f[0], line_no);
        e.x = parse_int<uint16_t>(f[1], line_no);
        e.y = parse_int<uint16_t>(f[2], line_no);
        e.p = parse_int<uint8_t>(f[3], line_no);
        check_event_bounds(e, s.width, s.height, line_no);
        s.events.push_back(e);
    }
    finalize_stream(s);
    return s;
}

template <typename T>
void put_le(std::ofstream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw ParseError("unexpected end of file");
    T v{};
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

EventStream read_events_bin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kBinMagic, 4) != 0) {
        throw ParseError("bad magic, not an EVS1 file: " + path);
    }
    EventStream s;
    s.width = get_le<uint32_t>(in);
    s.height = get_le<uint32_t>(in);
    s.duration_us = get_le<uint64_t>(in);
    uint64_t count = get_le<uint64_t>(in);
    s.events.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        Event e;
        e.t_us = static_cast<int64_t>(get_le<uint64_t>(in));
        e.x = get_le<uint16_t>(in);
        e.y = get_le<uint16_t>(in);
        e.p = get_le<uint8_t>(in);
        check_event_bounds(e, s.width, s.height, -1);
        s.events.push_back(e);
    }
    finalize_stream(s);
    return s;
}

}  // namespace

bool EventStream::is_sorted() const {
    return std::is_sorted(events.begin(), events.end(),
                          [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
}

void EventStream::validate() const {
    if (!is_sorted()) throw CorruptError("event stream is not sorted by timestamp");
    for (const Event& e : events) check_event_bounds(e, width, height, -1);
    if (!events.empty() && static_cast<uint64_t>(events.back().t_us) > duration_us) {
        throw CorruptError("duration_us is less than the last event timestamp");
    }
}

EventFormat event_format_from_string(const std::string& s) {
    if (s == "csv") return EventFormat::csv;
    if (s == "bin") return EventFormat::bin;
    throw ConfigError("unknown event format '" + s + "' (expected csv or bin)");
}

EventStream read_events(const std::string& path, EventFormat format) {
    return format == EventFormat::csv ? read_events_csv(path) : read_events_bin(path);
}

void write_events(const EventStream& stream, const std::string& path, EventFormat format) {
    if (format == EventFormat::csv) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path + " for writing");
        out << stream.width << ',' << stream.height << ',' << stream.duration_us << '\n';
        for (const Event& e : stream.events) {
            out << e.t_us << ',' << e.x << ',' << e.y << ',' << int(e.p) << '\n';
        }
        if (!out) throw IoError("write failed: " + path);
    } else {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open " + path + " for writing");
        out.write(kBinMagic, 4);
        put_le(out, stream.width);
        put_le(out, stream.height);
        put_le(out, stream.duration_us);
        put_le(out, static_cast<uint64_t>(stream.events.size()));
        for (const Event& e : stream.events) {
            put_le(out, static_cast<uint64_t>(e.t_us));
            put_le(out, e.x);
            put_le(out, e.y);
            put_le(out, e.p);
        }
        if (!out) throw IoError("write failed: " + path);
    }
}

SpikeTensor bin_to_spikes(const EventStream& stream, int64_t dt_us, int64_t t0_us, int T) {
    if (dt_us <= 0) throw ConfigError("dt_us must be positive");
    if (T <= 0) throw ConfigError("T must be positive");
    if (t0_us < 0) throw ConfigError("t0_us must be non-negative");

    SpikeTensor out;
    out.T = T;
    out.C = 2;
    out.H = static_cast<int>(stream.height);
    out.W = static_cast<int>(stream.width);
    out.dt_us = dt_us;
    out.data.assign(static_cast<size_t>(T) * 2 * out.H * out.W, 0);

    const int64_t t_end = t0_us + static_cast<int64_t>(T) * dt_us;
    for (const Event& e : stream.events) {
        if (e.t_us < t0_us || e.t_us >= t_end) continue;
        int t = static_cast<int>((e.t_us - t0_us) / dt_us);
        out.at(t, e.p, e.y, e.x) = 1;
    }
    return out;
}

std::vector<Segment> segment_stream(const EventStream& stream, int64_t segment_us,
                                    int64_t dt_us, int label, const std::string& source_id) {
    if (segment_us <= 0 || dt_us <= 0) throw ConfigError("segment_us and dt_us must be positive");
    if (segment_us % dt_us != 0) {
        throw ConfigError("segment_us (" + std::to_string(segment_us) +
                          ") must be a multiple of dt_us (" + std::to_string(dt_us) + ")");
    }
    const int T = static_cast<int>(segment_us / dt_us);
    const int64_t n = static_cast<int64_t>(stream.duration_us / segment_us);

    std::vector<Segment> out;
    out.reserve(n);
    for (int64_t i = 0; i < n; ++i) {
        Segment seg;
        seg.spikes = bin_to_spikes(stream, dt_us, i * segment_us, T);
        seg.label = label;
        seg.source_id = source_id;
        out.push_back(std::move(seg));
    }
    return out;
}

}  // namespace sdd
