#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "sdd/errors.hpp"
#include "sdd/synthgen.hpp"

using namespace sdd;

namespace {

SynthConfig small_config() {
    SynthConfig cfg;
    cfg.width = 64;
    cfg.height = 48;
    cfg.n_streams_per_class = 3;
    cfg.stream_duration_us = 500'000;
    cfg.blob_sigma = 5.0;
    cfg.seed = 42;
    return cfg;
}

}  // namespace

TEST_CASE("generate yields a balanced, labeled, well-formed corpus") {
    auto cfg = small_config();
    auto streams = generate(cfg);
    REQUIRE(streams.size() == 6);
    int per_label[2] = {0, 0};
    std::set<std::string> ids;
    for (const auto& ls : streams) {
        REQUIRE((ls.label == 0 || ls.label == 1));
        per_label[ls.label]++;
        ids.insert(ls.id);
        CHECK(ls.stream.width == 64);
        CHECK(ls.stream.height == 48);
        CHECK(ls.stream.duration_us == 500'000);
        ls.stream.validate();
        CHECK(ls.stream.is_sorted());
        CHECK(!ls.stream.events.empty());
        for (const auto& e : ls.stream.events) {
            CHECK(e.t_us >= 0);
            CHECK(static_cast<uint64_t>(e.t_us) < ls.stream.duration_us);
        }
    }
    CHECK(per_label[0] == 3);
    CHECK(per_label[1] == 3);
    CHECK(ids.size() == 6);  // unique ids
}

TEST_CASE("the same seed reproduces identical streams") {
    auto cfg = small_config();
    auto a = generate(cfg);
    auto b = generate(cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].stream == b[i].stream);
    }
}

TEST_CASE("different seeds give different event streams") {
    auto cfg = small_config();
    auto a = generate_stream(cfg, 0, 0);
    cfg.seed = 43;
    auto b = generate_stream(cfg, 0, 0);
    CHECK(!(a.stream == b.stream));
}

TEST_CASE("no motion and no noise means no events") {
    auto cfg = small_config();
    cfg.class0 = {0.0, 0.0, 0.0};
    cfg.noise_rate = 0.0;
    auto ls = generate_stream(cfg, 0, 0);
    CHECK(ls.stream.events.empty());
}

TEST_CASE("jitter makes class 1 busier than class 0") {
    auto cfg = small_config();
    cfg.noise_rate = 0.0;
    size_t n0 = 0, n1 = 0;
    for (int i = 0; i < 3; ++i) {
        n0 += generate_stream(cfg, 0, i).stream.events.size();
        n1 += generate_stream(cfg, 1, i).stream.events.size();
    }
    CHECK(n1 > n0);
}

TEST_CASE("a plain event-count threshold separates most streams") {
    // The two classes must be learnable; a crude per-stream statistic should
    // already split a small corpus well above chance.
    auto cfg = small_config();
    cfg.n_streams_per_class = 10;
    auto streams = generate(cfg);
    std::vector<size_t> c0, c1;
    for (const auto& ls : streams) {
        (ls.label == 0 ? c0 : c1).push_back(ls.stream.events.size());
    }
    std::sort(c0.begin(), c0.end());
    std::sort(c1.begin(), c1.end());
    // Threshold at the midpoint between class medians.
    const double thresh = (static_cast<double>(c0[c0.size() / 2]) + c1[c1.size() / 2]) / 2.0;
    int correct = 0;
    for (size_t v : c0) correct += v < thresh;
    for (size_t v : c1) correct += v >= thresh;
    CHECK(correct >= 16);  // >= 80% of 20
}

TEST_CASE("noise obeys the configured rate roughly") {
    auto cfg = small_config();
    cfg.class0 = {0.0, 0.0, 0.0};  // isolate the noise process
    cfg.noise_rate = 2.0;          // events per pixel per second
    cfg.stream_duration_us = 1'000'000;
    auto ls = generate_stream(cfg, 0, 0);
    const double expected = 2.0 * 64 * 48;  // lambda of the Poisson total
    const double got = static_cast<double>(ls.stream.events.size());
    CHECK(got > expected * 0.9);
    CHECK(got < expected * 1.1);
}

TEST_CASE("config validation rejects bad values") {
    auto bad = small_config();
    bad.width = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.n_streams_per_class = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.stream_duration_us = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.render_fps = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.noise_rate = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small_config();
    bad.blob_sigma = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("JSON config round trip and error handling") {
    auto cfg = small_config();
    cfg.class1.jitter_rate_hz = 33.0;
    cfg.sim.contrast_threshold = 0.25;
    auto text = synth_config_to_json(cfg);
    auto back = synth_config_from_json(text);
    CHECK(back.width == cfg.width);
    CHECK(back.height == cfg.height);
    CHECK(back.n_streams_per_class == cfg.n_streams_per_class);
    CHECK(back.stream_duration_us == cfg.stream_duration_us);
    CHECK(back.class1.jitter_rate_hz == 33.0);
    CHECK(back.sim.contrast_threshold == 0.25);
    CHECK(back.seed == cfg.seed);

    CHECK_THROWS_AS(synth_config_from_json("{not json"), ConfigError);
    CHECK_THROWS_AS(synth_config_from_json(R"({"width": -3})"), ConfigError);
}
