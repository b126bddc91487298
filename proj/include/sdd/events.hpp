#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdd {

// One DVS event. Polarity: 0 = OFF, 1 = ON.
struct Event {
    int64_t t_us = 0;
    uint16_t x = 0;
    uint16_t y = 0;
    uint8_t p = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

struct EventStream {
    uint32_t width = 0;
    uint32_t height = 0;
    uint64_t duration_us = 0;
    std::vector<Event> events;
    // Set when read_events had to re-sort an unsorted input.
    bool sort_warning = false;

    bool is_sorted() const;
    // Checks bounds, sortedness and duration >= last timestamp.
    void validate() const;

    friend bool operator==(const EventStream& a, const EventStream& b) {
        return a.width == b.width && a.height == b.height &&
               a.duration_us == b.duration_us && a.events == b.events;
    }
};

// Binary spike frames over time, dense layout [t][c][h][w]. Channel 0 = OFF, 1 = ON.
struct SpikeTensor {
    int T = 0;
    int C = 2;
    int H = 0;
    int W = 0;
    int64_t dt_us = 0;
    std::vector<uint8_t> data;  // T*C*H*W values in {0,1}

    size_t index(int t, int c, int h, int w) const {
        return ((static_cast<size_t>(t) * C + c) * H + h) * W + w;
    }
    uint8_t at(int t, int c, int h, int w) const { return data[index(t, c, h, w)]; }
    uint8_t& at(int t, int c, int h, int w) { return data[index(t, c, h, w)]; }
};

// One labeled training sample: spikes for a fixed-duration slice of a stream.
struct Segment {
    SpikeTensor spikes;
    int label = 0;  // 0 = focused, 1 = distracted
    std::string source_id;
};

enum class EventFormat { csv, bin };

EventFormat event_format_from_string(const std::string& s);

// Reads a stream in either format. Events are re-sorted if the file is
// unsorted (sort_warning is set on the result).
EventStream read_events(const std::string& path, EventFormat format);

void write_events(const EventStream& stream, const std::string& path, EventFormat format);

/// Scatters events into a binary tensor: element [t][c][h][w] is 1 iff at least
// one event with polarity c at pixel (w,h) falls in
// [t0_us + t*dt_us, t0_us + (t+1)*dt_us). Events outside the window are ignored.
SpikeTensor bin_to_spikes(const EventStream& stream, int64_t dt_us, int64_t t0_us, int T);

// Cuts the stream into floor(duration/segment_us) segments of segment_us/dt_us
// bins each; the trailing remainder is dropped.
std::vector<Segment> segment_stream(const EventStream& stream, int64_t segment_us,
                                    int64_t dt_us, int label,
                                    const std::string& source_id = "");

}  // namespace sdd
