#pragma once

#include <string>
#include <vector>

#include "sdd/events.hpp"

namespace sdd {

// Grayscale frames with luminance in [0,1], all sharing one geometry.
struct FrameSequence {
    int width = 0;
    int height = 0;
    double fps = 0.0;
    std::vector<std::vector<double>> frames;  // each H*W row-major
};

struct SimConfig {
    double contrast_threshold = 0.2;  // log-intensity units
    double eps = 1e-3;                // floor added before the log
};

// Ideal contrast-threshold event simulator. Per pixel, a reference
// log-intensity tracks the signal in steps of contrast_threshold; each step
// crossed emits one event, timestamps interpolated linearly within the
// inter-frame interval and strictly increasing per pixel.
EventStream simulate_events(const FrameSequence& seq, const SimConfig& cfg);

// Binary PGM (P5, maxval <= 255) loaders; pixel values scaled to [0,1].
std::vector<double> read_pgm(const std::string& path, int& width, int& height);
FrameSequence read_pgm_dir(const std::string& dir, double fps);
void write_pgm(const std::string& path, const std::vector<double>& px, int width, int height);

}  // namespace sdd
