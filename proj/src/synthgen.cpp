#include "sdd/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "sdd/errors.hpp"

namespace sdd {

namespace {

// splitmix64; derives independent per-stream seeds from (seed, index).
uint64_t mix_seed(uint64_t seed, uint64_t index) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void render_blob(std::vector<double>& frame, int W, int H, double cx, double cy,
                 double sigma, double amp, double background) {
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    // Only the blob neighborhood deviates from the background.
    const int r = static_cast<int>(std::ceil(4.0 * sigma));
    std::fill(frame.begin(), frame.end(), background);
    const int x0 = std::max(0, static_cast<int>(cx) - r);
    const int x1 = std::min(W - 1, static_cast<int>(cx) + r);
    const int y0 = std::max(0, static_cast<int>(cy) - r);
    const int y1 = std::min(H - 1, static_cast<int>(cy) + r);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx, dy = y - cy;
            double v = background + amp * std::exp(-(dx * dx + dy * dy) * inv2s2);
            frame[static_cast<size_t>(y) * W + x] = std::min(v, 1.0);
        }
    }
}

}  // namespace

void SynthConfig::validate() const {
    if (width <= 0 || height <= 0) throw ConfigError("geometry must be positive");
    if (n_streams_per_class < 0) throw ConfigError("n_streams_per_class must be >= 0");
    if (stream_duration_us <= 0) throw ConfigError("stream_duration_us must be positive");
    if (render_fps <= 0) throw ConfigError("render_fps must be positive");
    if (noise_rate < 0) throw ConfigError("noise_rate must be >= 0");
    if (blob_sigma <= 0) throw ConfigError("blob_sigma must be positive");
    if (background < 0 || background + blob_amp > 1.0 + 1e-9) {
        throw ConfigError("background + blob_amp must stay within [0,1]");
    }
}

LabeledStream generate_stream(const SynthConfig& cfg, int label, int index) {
    cfg.validate();
    const MotionProfile& prof = label == 0 ? cfg.class0 : cfg.class1;
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<uint64_t>(label) * 1000003 + index));

    const int n_frames =
        static_cast<int>(cfg.stream_duration_us * cfg.render_fps / 1e6) + 1;
    const double dt_s = 1.0 / cfg.render_fps;

    // Start away from the border so a full drift stays in frame.
    std::uniform_real_distribution<double> ux(cfg.width * 0.3, cfg.width * 0.7);
    std::uniform_real_distribution<double> uy(cfg.height * 0.3, cfg.height * 0.7);
    std::uniform_real_distribution<double> uang(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    double cx = ux(rng), cy = uy(rng);
    const double ang = uang(rng);
    double vx = prof.drift_px_per_s * std::cos(ang);
    double vy = prof.drift_px_per_s * std::sin(ang);

    FrameSequence seq;
    seq.width = cfg.width;
    seq.height = cfg.height;
    seq.fps = cfg.render_fps;
    seq.frames.resize(n_frames);

    const double burst_p = std::min(1.0, prof.jitter_rate_hz * dt_s);
    double ox = 0.0, oy = 0.0;  // jitter offset
    for (int j = 0; j < n_frames; ++j) {
        if (prof.jitter_amp_px > 0 && unit(rng) < burst_p) {
            const double a = uang(rng);
            ox = prof.jitter_amp_px * std::cos(a);
            oy = prof.jitter_amp_px * std::sin(a);
        } else {
            ox = 0.0;
            oy = 0.0;
        }
        seq.frames[j].resize(static_cast<size_t>(cfg.width) * cfg.height);
        double bx = std::clamp(cx + ox, 2.0, cfg.width - 3.0);
        double by = std::clamp(cy + oy, 2.0, cfg.height - 3.0);
        render_blob(seq.frames[j], cfg.width, cfg.height, bx, by, cfg.blob_sigma,
                    cfg.blob_amp, cfg.background);
        cx += vx * dt_s;
        cy += vy * dt_s;
        // Bounce off the borders to stay visible.
        if (cx < cfg.width * 0.1 || cx > cfg.width * 0.9) vx = -vx;
        if (cy < cfg.height * 0.1 || cy > cfg.height * 0.9) vy = -vy;
    }

    LabeledStream out;
    out.label = label;
    out.id = "class" + std::to_string(label) + "_" + std::to_string(index);
    out.stream = simulate_events(seq, cfg.sim);
    // Normalize to the configured duration; interpolated timestamps past the
    // end (possible only under extreme per-pixel event rates) are dropped.
    std::erase_if(out.stream.events,
                  [&](const Event& e) { return e.t_us >= cfg.stream_duration_us; });
    out.stream.duration_us = static_cast<uint64_t>(cfg.stream_duration_us);

    // Uniform background noise.
    if (cfg.noise_rate > 0) {
        const double expected = cfg.noise_rate * cfg.width * cfg.height *
                                (cfg.stream_duration_us / 1e6);
        std::poisson_distribution<int64_t> pn(expected);
        std::uniform_int_distribution<int64_t> ut(0, cfg.stream_duration_us - 1);
        std::uniform_int_distribution<int> uxp(0, cfg.width - 1);
        std::uniform_int_distribution<int> uyp(0, cfg.height - 1);
        std::uniform_int_distribution<int> up(0, 1);
        const int64_t n_noise = pn(rng);
        for (int64_t i = 0; i < n_noise; ++i) {
            out.stream.events.push_back({ut(rng), static_cast<uint16_t>(uxp(rng)),
                                         static_cast<uint16_t>(uyp(rng)),
                                         static_cast<uint8_t>(up(rng))});
        }
        std::stable_sort(out.stream.events.begin(), out.stream.events.end(),
                         [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
    }
    out.stream.validate();
    return out;
}

std::vector<LabeledStream> generate(const SynthConfig& cfg) {
    cfg.validate();
    std::vector<LabeledStream> out(static_cast<size_t>(cfg.n_streams_per_class) * 2);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < cfg.n_streams_per_class * 2; ++i) {
        const int label = i % 2;
        const int index = i / 2;
        out[i] = generate_stream(cfg, label, index);
    }
    return out;
}

SynthConfig synth_config_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid synth config JSON: ") + e.what());
    }
    SynthConfig cfg;
    try {
        cfg.width = j.value("width", cfg.width);
        cfg.height = j.value("height", cfg.height);
        cfg.n_streams_per_class = j.value("n_streams_per_class", cfg.n_streams_per_class);
        cfg.stream_duration_us = j.value("stream_duration_us", cfg.stream_duration_us);
        cfg.render_fps = j.value("render_fps", cfg.render_fps);
        cfg.noise_rate = j.value("noise_rate", cfg.noise_rate);
        cfg.blob_sigma = j.value("blob_sigma", cfg.blob_sigma);
        cfg.blob_amp = j.value("blob_amp", cfg.blob_amp);
        cfg.background = j.value("background", cfg.background);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.sim.contrast_threshold = j.value("contrast_threshold", cfg.sim.contrast_threshold);
        cfg.sim.eps = j.value("eps", cfg.sim.eps);
        auto profile = [](const nlohmann::json& p, MotionProfile base) {
            base.drift_px_per_s = p.value("drift_px_per_s", base.drift_px_per_s);
            base.jitter_rate_hz = p.value("jitter_rate_hz", base.jitter_rate_hz);
            base.jitter_amp_px = p.value("jitter_amp_px", base.jitter_amp_px);
            return base;
        };
        if (j.contains("class0")) cfg.class0 = profile(j["class0"], cfg.class0);
        if (j.contains("class1")) cfg.class1 = profile(j["class1"], cfg.class1);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid synth config field: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string synth_config_to_json(const SynthConfig& cfg) {
    nlohmann::json j{
        {"width", cfg.width},
        {"height", cfg.height},
        {"n_streams_per_class", cfg.n_streams_per_class},
        {"stream_duration_us", cfg.stream_duration_us},
        {"render_fps", cfg.render_fps},
        {"noise_rate", cfg.noise_rate},
        {"blob_sigma", cfg.blob_sigma},
        {"blob_amp", cfg.blob_amp},
        {"background", cfg.background},
        {"seed", cfg.seed},
        {"contrast_threshold", cfg.sim.contrast_threshold},
        {"eps", cfg.sim.eps},
        {"class0",
         {{"drift_px_per_s", cfg.class0.drift_px_per_s},
          {"jitter_rate_hz", cfg.class0.jitter_rate_hz},
          {"jitter_amp_px", cfg.class0.jitter_amp_px}}},
        {"class1",
         {{"drift_px_per_s", cfg.class1.drift_px_per_s},
          {"jitter_rate_hz", cfg.class1.jitter_rate_hz},
          {"jitter_amp_px", cfg.class1.jitter_amp_px}}},
    };
    return j.dump(2);
}

}  // namespace sdd
