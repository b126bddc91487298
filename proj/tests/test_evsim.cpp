#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "sdd/errors.hpp"
#include "sdd/evsim.hpp"

using namespace sdd;
namespace fs = std::filesystem;

namespace {

FrameSequence constant_seq(int w, int h, double value, int n_frames, double fps = 100.0) {
    FrameSequence seq;
    seq.width = w;
    seq.height = h;
    seq.fps = fps;
    seq.frames.assign(n_frames, std::vector<double>(static_cast<size_t>(w) * h, value));
    return seq;
}

}  // namespace

TEST_CASE("constant frames emit no events") {
    auto seq = constant_seq(8, 6, 0.4, 10);
    auto ev = simulate_events(seq, {});
    CHECK(ev.events.empty());
    CHECK(ev.width == 8);
    CHECK(ev.height == 6);
    CHECK(ev.duration_us == 90000);
}

TEST_CASE("a single log step emits floor(|dL|/C) ON events") {
    // log(0.9 + 1e-3) - log(0.1 + 1e-3) = 2.09037...; with C = 0.2 that is
    // floor(10.45...) = 10 events, all polarity 1, on the one changed pixel.
    auto seq = constant_seq(3, 3, 0.1, 2);
    seq.frames[1][4] = 0.9;
    SimConfig cfg;
    cfg.contrast_threshold = 0.2;
    cfg.eps = 1e-3;
    auto ev = simulate_events(seq, cfg);
    REQUIRE(ev.events.size() == 10);
    for (const auto& e : ev.events) {
        CHECK(e.p == 1);
        CHECK(e.x == 1);
        CHECK(e.y == 1);
        CHECK(e.t_us > 0);
        CHECK(e.t_us < 10000);
    }
    for (size_t i = 1; i < ev.events.size(); ++i) {
        CHECK(ev.events[i].t_us > ev.events[i - 1].t_us);
    }
}

TEST_CASE("a decrease emits OFF events") {
    auto seq = constant_seq(2, 2, 0.8, 2);
    seq.frames[1][0] = 0.2;
    auto ev = simulate_events(seq, {});
    CHECK(!ev.events.empty());
    for (const auto& e : ev.events) CHECK(e.p == 0);
}

TEST_CASE("sub-threshold change emits nothing") {
    auto seq = constant_seq(2, 2, 0.5, 2);
    seq.frames[1][0] = 0.5 * std::exp(0.19);  // |dL| just under C = 0.2
    auto ev = simulate_events(seq, {});
    CHECK(ev.events.empty());
}

TEST_CASE("fewer than two frames is rejected") {
    auto seq = constant_seq(2, 2, 0.5, 1);
    CHECK_THROWS_AS(simulate_events(seq, {}), ConfigError);
    seq.frames.clear();
    CHECK_THROWS_AS(simulate_events(seq, {}), ConfigError);
}

TEST_CASE("bad config and geometry are rejected") {
    auto seq = constant_seq(2, 2, 0.5, 3);
    SimConfig bad;
    bad.contrast_threshold = 0.0;
    CHECK_THROWS_AS(simulate_events(seq, bad), ConfigError);
    bad = {};
    bad.eps = -1.0;
    CHECK_THROWS_AS(simulate_events(seq, bad), ConfigError);

    seq.fps = 0.0;
    CHECK_THROWS_AS(simulate_events(seq, {}), ConfigError);
    seq.fps = 100.0;
    seq.frames[1].pop_back();
    CHECK_THROWS_AS(simulate_events(seq, {}), ShapeError);
}

TEST_CASE("polarity always agrees with the luminance change sign") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ulum(0.05, 0.95);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 4, h = 4, n = 6;
        FrameSequence seq = constant_seq(w, h, 0.5, n);
        for (auto& f : seq.frames) {
            for (auto& v : f) v = ulum(rng);
        }
        auto ev = simulate_events(seq, {});
        // Replay the tracker: per pixel, the cumulative signed count must
        // follow the frame-to-frame log changes in direction.
        std::vector<int64_t> next_bound(n);
        for (int j = 0; j < n; ++j) next_bound[j] = llround(j * 1e6 / seq.fps);
        for (const auto& e : ev.events) {
            // Find the interval this event falls in (last interval closed).
            int j = 1;
            while (j < n - 1 && e.t_us >= next_bound[j]) ++j;
            const size_t i = static_cast<size_t>(e.y) * w + e.x;
            const double dl = std::log(seq.frames[j][i] + 1e-3) -
                              std::log(seq.frames[j - 1][i] + 1e-3);
            // The event's polarity must match the sign of the raw change in
            // its interval unless the tracker lagged; a lagging tracker can
            // only amplify the same sign, never flip it for a fresh tracker
            // within one interval, so check at least the gross statistic.
            if (std::abs(dl) >= 0.2) {
                CHECK(e.p == (dl > 0 ? 1 : 0));
            }
        }
    }
}

TEST_CASE("halving the threshold never yields fewer events") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ulum(0.05, 0.95);
    for (int trial = 0; trial < 30; ++trial) {
        FrameSequence seq = constant_seq(5, 5, 0.5, 8);
        for (auto& f : seq.frames) {
            for (auto& v : f) v = ulum(rng);
        }
        SimConfig coarse, fine;
        coarse.contrast_threshold = 0.3;
        fine.contrast_threshold = 0.15;
        auto ec = simulate_events(seq, coarse);
        auto ef = simulate_events(seq, fine);
        CHECK(ef.events.size() >= ec.events.size());
    }
}

TEST_CASE("a full reversal returns the tracker close to its start") {
    // 0.2 -> 0.8 -> 0.2: ON count and OFF count may differ by at most one
    // threshold step because the tracker quantizes.
    FrameSequence seq = constant_seq(1, 1, 0.2, 3);
    seq.frames[1][0] = 0.8;
    seq.frames[2][0] = 0.2;
    auto ev = simulate_events(seq, {});
    int on = 0, off = 0;
    for (const auto& e : ev.events) (e.p ? on : off)++;
    CHECK(on > 0);
    CHECK(std::abs(on - off) <= 1);
}

TEST_CASE("events are globally sorted and within duration") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> ulum(0.05, 0.95);
    FrameSequence seq = constant_seq(6, 4, 0.5, 12, 250.0);
    for (auto& f : seq.frames) {
        for (auto& v : f) v = ulum(rng);
    }
    auto ev = simulate_events(seq, {});
    CHECK(ev.is_sorted());
    ev.validate();
    for (const auto& e : ev.events) {
        CHECK(static_cast<uint64_t>(e.t_us) <= ev.duration_us);
        CHECK(e.x < 6);
        CHECK(e.y < 4);
    }
}

TEST_CASE("PGM write/read round trip") {
    std::mt19937_64 rng(5);
    const int w = 17, h = 9;
    std::vector<double> px(static_cast<size_t>(w) * h);
    for (auto& v : px) v = (rng() % 256) / 255.0;
    auto path = (fs::temp_directory_path() / "sdd_test_roundtrip.pgm").string();
    write_pgm(path, px, w, h);
    int rw = 0, rh = 0;
    auto back = read_pgm(path, rw, rh);
    CHECK(rw == w);
    CHECK(rh == h);
    REQUIRE(back.size() == px.size());
    for (size_t i = 0; i < px.size(); ++i) CHECK(back[i] == doctest::Approx(px[i]).epsilon(1e-9));
}

TEST_CASE("PGM parser handles comments and rejects junk") {
    auto dir = fs::temp_directory_path() / "sdd_test_pgm";
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "ok.pgm", std::ios::binary);
        f << "P5\n# a comment\n2 2\n255\n";
        f.write("\x00\x7f\xff\x40", 4);
    }
    int w = 0, h = 0;
    auto px = read_pgm((dir / "ok.pgm").string(), w, h);
    CHECK(w == 2);
    CHECK(px[1] == doctest::Approx(127.0 / 255.0));

    {
        std::ofstream f(dir / "bad_magic.pgm", std::ios::binary);
        f << "P2\n2 2\n255\n0 1 2 3\n";
    }
    CHECK_THROWS_AS(read_pgm((dir / "bad_magic.pgm").string(), w, h), ParseError);

    {
        std::ofstream f(dir / "truncated.pgm", std::ios::binary);
        f << "P5\n4 4\n255\nxx";
    }
    CHECK_THROWS_AS(read_pgm((dir / "truncated.pgm").string(), w, h), ParseError);

    CHECK_THROWS_AS(read_pgm((dir / "missing.pgm").string(), w, h), IoError);
}

TEST_CASE("read_pgm_dir sorts frames and enforces the minimum count") {
    auto dir = fs::temp_directory_path() / "sdd_test_pgmdir";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<double> a(4, 0.0), b(4, 1.0);
    write_pgm((dir / "frame_001.pgm").string(), b, 2, 2);
    write_pgm((dir / "frame_000.pgm").string(), a, 2, 2);
    auto seq = read_pgm_dir(dir.string(), 50.0);
    REQUIRE(seq.frames.size() == 2);
    CHECK(seq.frames[0][0] == 0.0);  // lexicographic order, not discovery order
    CHECK(seq.frames[1][0] == 1.0);
    CHECK(seq.width == 2);

    fs::remove(dir / "frame_001.pgm");
    CHECK_THROWS_AS(read_pgm_dir(dir.string(), 50.0), ConfigError);
    CHECK_THROWS_AS(read_pgm_dir((dir / "nope").string(), 50.0), IoError);
}
