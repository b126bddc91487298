#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdd/events.hpp"
#include "sdd/evsim.hpp"

namespace sdd {

// Blob motion per class. Class 0 has no jitter (smooth drift only); class 1
// adds intermittent rapid-displacement bursts that emit dense event packets.
struct MotionProfile {
    double drift_px_per_s = 20.0;
    double jitter_rate_hz = 0.0;   // expected bursts per second
    double jitter_amp_px = 0.0;    // displacement magnitude during a burst
};

struct SynthConfig {
    int width = 640;
    int height = 480;
    int n_streams_per_class = 8;
    int64_t stream_duration_us = 3'000'000;
    double render_fps = 100.0;
    MotionProfile class0{1.0, 0.0, 0.0};
    MotionProfile class1{1.0, 100.0, 75.0};
    double noise_rate = 0.002;  // background events per pixel per second
    double blob_sigma = 38.0;
    double blob_amp = 0.11;
    double background = 0.15;
    uint64_t seed = 1;
    SimConfig sim;

    void validate() const;
};

struct LabeledStream {
    EventStream stream;
    int label = 0;
    std::string id;
};

// Renders per-stream frame sequences (a drifting Gaussian blob, jittered for
// class 1), converts them to events through simulate_events, and overlays
// Poisson background noise. Exactly n_streams_per_class streams per class,
// fully determined by (seed, stream index).
std::vector<LabeledStream> generate(const SynthConfig& cfg);

// Renders one stream; exposed so the CLI and tests can generate incrementally.
LabeledStream generate_stream(const SynthConfig& cfg, int label, int index);

SynthConfig synth_config_from_json(const std::string& json_text);
std::string synth_config_to_json(const SynthConfig& cfg);

}  // namespace sdd
