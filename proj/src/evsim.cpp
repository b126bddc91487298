#include "sdd/evsim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sdd/errors.hpp"

namespace sdd {

EventStream simulate_events(const FrameSequence& seq, const SimConfig& cfg) {
    if (seq.frames.size() < 2) throw ConfigError("simulate_events needs at least 2 frames");
    if (seq.fps <= 0) throw ConfigError("fps must be positive");
    if (cfg.contrast_threshold <= 0 || cfg.eps <= 0) {
        throw ConfigError("contrast_threshold and eps must be positive");
    }
    const size_t n_px = static_cast<size_t>(seq.width) * seq.height;
    for (const auto& f : seq.frames) {
        if (f.size() != n_px) throw ShapeError("frame size does not match geometry");
    }

    const int n_frames = static_cast<int>(seq.frames.size());
    // Integer frame boundaries in microseconds.
    std::vector<int64_t> bounds(n_frames);
    for (int j = 0; j < n_frames; ++j) {
        bounds[j] = llround(static_cast<double>(j) * 1e6 / seq.fps);
    }

    EventStream out;
    out.width = static_cast<uint32_t>(seq.width);
    out.height = static_cast<uint32_t>(seq.height);
    out.duration_us = static_cast<uint64_t>(bounds.back());

    std::vector<double> ref(n_px);
    for (size_t i = 0; i < n_px; ++i) ref[i] = std::log(seq.frames[0][i] + cfg.eps);

    std::vector<int64_t> last_t(n_px, -1);
    for (int j = 1; j < n_frames; ++j) {
        const int64_t t0 = bounds[j - 1];
        const int64_t dt = bounds[j] - bounds[j - 1];
        const auto& frame = seq.frames[j];
        for (int y = 0; y < seq.height; ++y) {
            for (int x = 0; x < seq.width; ++x) {
                const size_t i = static_cast<size_t>(y) * seq.width + x;
                const double logv = std::log(frame[i] + cfg.eps);
                const double diff = logv - ref[i];
                const int64_t k =
                    static_cast<int64_t>(std::floor(std::abs(diff) / cfg.contrast_threshold));
                if (k == 0) continue;
                const uint8_t pol = diff > 0 ? 1 : 0;
                for (int64_t e = 1; e <= k; ++e) {
                    int64_t t = t0 + e * dt / (k + 1);
                    if (t <= last_t[i]) t = last_t[i] + 1;
                    last_t[i] = t;
                    out.events.push_back({t, static_cast<uint16_t>(x),
                                          static_cast<uint16_t>(y), pol});
                }
                ref[i] += (pol ? 1.0 : -1.0) * static_cast<double>(k) * cfg.contrast_threshold;
            }
        }
    }

    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
    if (!out.events.empty() &&
        static_cast<uint64_t>(out.events.back().t_us) > out.duration_us) {
        out.duration_us = static_cast<uint64_t>(out.events.back().t_us);
    }
    return out;
}

std::vector<double> read_pgm(const std::string& path, int& width, int& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    auto next_token = [&in, &path]() -> std::string {
        std::string tok;
        int c;
        while ((c = in.get()) != EOF) {
            if (c == '#') {  // comment to end of line
                while ((c = in.get()) != EOF && c != '\n') {
                }
                continue;
            }
            if (std::isspace(c)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(c));
        }
        if (tok.empty()) throw ParseError("unexpected end of PGM header: " + path);
        return tok;
    };

    if (next_token() != "P5") throw ParseError("not a binary PGM (P5): " + path);
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
        throw ParseError("unsupported PGM dimensions or maxval in " + path);
    }

    const size_t n = static_cast<size_t>(width) * height;
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), n);
    if (static_cast<size_t>(in.gcount()) != n) throw ParseError("PGM pixel data truncated: " + path);

    std::vector<double> px(n);
    for (size_t i = 0; i < n; ++i) px[i] = raw[i] / static_cast<double>(maxval);
    return px;
}

void write_pgm(const std::string& path, const std::vector<double>& px, int width, int height) {
    if (px.size() != static_cast<size_t>(width) * height) {
        throw ShapeError("write_pgm: pixel count does not match geometry");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P5\n" << width << ' ' << height << "\n255\n";
    std::vector<unsigned char> raw(px.size());
    for (size_t i = 0; i < px.size(); ++i) {
        double v = std::clamp(px[i], 0.0, 1.0);
        raw[i] = static_cast<unsigned char>(llround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
    if (!out) throw IoError("write failed: " + path);
}

FrameSequence read_pgm_dir(const std::string& dir, double fps) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);

    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
            paths.push_back(entry.path());
        }
    }
    std::sort(paths.begin(), paths.end());
    if (paths.size() < 2) throw ConfigError("need at least 2 .pgm frames in " + dir);

    FrameSequence seq;
    seq.fps = fps;
    for (const auto& p : paths) {
        int w = 0, h = 0;
        auto px = read_pgm(p.string(), w, h);
        if (seq.frames.empty()) {
            seq.width = w;
            seq.height = h;
        } else if (w != seq.width || h != seq.height) {
            throw ShapeError("frame geometry mismatch at " + p.string());
        }
        seq.frames.push_back(std::move(px));
    }
    return seq;
}

}  // namespace sdd
