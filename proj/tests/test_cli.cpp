// End-to-end tests that drive the installed CLI binary (path injected via the
// SDD_CLI_PATH compile definition) through a shell, checking exit codes and
// emitted artifacts.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "sdd/checkpoint.hpp"
#include "sdd/evsim.hpp"
#include "sdd/events.hpp"
#include "sdd/network.hpp"

using namespace sdd;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(SDD_CLI_PATH) + " " + args + " 2>&1";
    CliResult res;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) res.output.append(buf, n);
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A tiny dataset config the training tests can finish quickly on.
fs::path write_small_synth_config(const fs::path& dir) {
    fs::path p = dir / "synth.json";
    std::ofstream out(p);
    out << R"({"width": 64, "height": 48, "n_streams_per_class": 3,
               "stream_duration_us": 400000, "blob_sigma": 5.0, "seed": 9})";
    return p;
}

}  // namespace

TEST_CASE("no subcommand is a usage error") {
    auto res = run_cli("");
    CHECK(res.exit_code == 2);
}

TEST_CASE("simulate: identical frames produce zero events") {
    auto dir = fresh_dir("sdd_cli_sim");
    std::vector<double> px(16 * 12, 0.5);
    write_pgm((dir / "f0.pgm").string(), px, 16, 12);
    write_pgm((dir / "f1.pgm").string(), px, 16, 12);
    const auto out = dir / "out.evs";
    auto res = run_cli("simulate --frames " + dir.string() + " --out " + out.string());
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("\"events\":0") != std::string::npos);
    CHECK(fs::exists(out));
    CHECK(fs::exists(dir / "out.evs.manifest.json"));

    auto stream = read_events(out.string(), EventFormat::bin);
    CHECK(stream.events.empty());
    CHECK(stream.width == 16);

    // Refusing to overwrite, then allowing it.
    auto again = run_cli("simulate --frames " + dir.string() + " --out " + out.string());
    CHECK(again.exit_code == 5);
    auto forced = run_cli("simulate --frames " + dir.string() + " --out " + out.string() +
                          " --overwrite");
    CHECK(forced.exit_code == 0);
}

TEST_CASE("simulate: missing frame directory is an I/O error") {
    auto dir = fresh_dir("sdd_cli_sim_missing");
    auto res = run_cli("simulate --frames " + (dir / "nope").string() + " --out " +
                       (dir / "o.evs").string());
    CHECK(res.exit_code == 3);
}

TEST_CASE("simulate: one frame is a config error") {
    auto dir = fresh_dir("sdd_cli_sim_one");
    std::vector<double> px(4, 0.5);
    write_pgm((dir / "f0.pgm").string(), px, 2, 2);
    auto res = run_cli("simulate --frames " + dir.string() + " --out " +
                       (dir / "o.evs").string());
    CHECK(res.exit_code == 2);
}

TEST_CASE("gen-synth writes a balanced manifest and is seed-reproducible") {
    auto dir = fresh_dir("sdd_cli_gen");
    auto cfg = write_small_synth_config(dir);
    auto out1 = dir / "d1";
    auto out2 = dir / "d2";
    auto r1 = run_cli("gen-synth --config " + cfg.string() + " --out " + out1.string());
    REQUIRE(r1.exit_code == 0);
    CHECK(r1.output.find("\"streams\":6") != std::string::npos);
    REQUIRE(fs::exists(out1 / "manifest.json"));
    CHECK(fs::exists(out1 / "class0_0.evs"));
    CHECK(fs::exists(out1 / "class1_2.evs"));

    auto r2 = run_cli("gen-synth --config " + cfg.string() + " --out " + out2.string());
    REQUIRE(r2.exit_code == 0);
    CHECK(read_file(out1 / "class0_0.evs") == read_file(out2 / "class0_0.evs"));
    CHECK(read_file(out1 / "class1_1.evs") == read_file(out2 / "class1_1.evs"));

    // Non-empty output dir without --overwrite.
    auto r3 = run_cli("gen-synth --config " + cfg.string() + " --out " + out1.string());
    CHECK(r3.exit_code == 5);

    // Seed override changes the data.
    auto out3 = dir / "d3";
    auto r4 = run_cli("gen-synth --config " + cfg.string() + " --seed 77 --out " +
                      out3.string());
    REQUIRE(r4.exit_code == 0);
    CHECK(read_file(out1 / "class0_0.evs") != read_file(out3 / "class0_0.evs"));
}

TEST_CASE("gen-synth rejects a broken config") {
    auto dir = fresh_dir("sdd_cli_gen_bad");
    {
        std::ofstream out(dir / "bad.json");
        out << "{\"width\": -5}";
    }
    auto res = run_cli("gen-synth --config " + (dir / "bad.json").string() + " --out " +
                       (dir / "d").string());
    CHECK(res.exit_code == 2);
    auto missing = run_cli("gen-synth --config " + (dir / "nope.json").string() + " --out " +
                           (dir / "d").string());
    CHECK(missing.exit_code == 3);
}

TEST_CASE("train/eval/infer/inspect round trip on a small dataset") {
    auto dir = fresh_dir("sdd_cli_train");
    auto cfg = write_small_synth_config(dir);
    auto data = dir / "data";
    REQUIRE(run_cli("gen-synth --config " + cfg.string() + " --out " + data.string()).exit_code ==
            0);

    const auto model = dir / "model.sdd";
    auto tr = run_cli("train --data " + data.string() + " --out " + model.string() +
                      " --epochs 2 --deterministic --seed 3");
    REQUIRE(tr.exit_code == 0);
    CHECK(fs::exists(model));
    CHECK(fs::exists(dir / "model.sdd.metrics.jsonl"));
    CHECK(fs::exists(dir / "model.sdd.manifest.json"));
    CHECK(tr.output.find("\"best_epoch\"") != std::string::npos);

    // Re-running without --overwrite refuses.
    auto tr2 = run_cli("train --data " + data.string() + " --out " + model.string() +
                       " --epochs 1 --deterministic");
    CHECK(tr2.exit_code == 5);

    // eval runs and reports.
    auto ev = run_cli("eval --model " + model.string() + " --data " + data.string());
    CHECK(ev.exit_code == 0);
    CHECK(ev.output.find("\"accuracy\"") != std::string::npos);

    // infer on one stream emits one JSON line per segment.
    auto inf = run_cli("infer --model " + model.string() + " --events " +
                       (data / "class1_0.evs").string());
    CHECK(inf.exit_code == 0);
    CHECK(inf.output.find("\"class\"") != std::string::npos);

    // infer on a stream shorter than one segment reports zero segments.
    EventStream tiny;
    tiny.width = 64;
    tiny.height = 48;
    tiny.duration_us = 10000;  // < 33 ms
    write_events(tiny, (dir / "tiny.evs").string(), EventFormat::bin);
    auto short_inf = run_cli("infer --model " + model.string() + " --events " +
                             (dir / "tiny.evs").string());
    CHECK(short_inf.exit_code == 0);
    CHECK(short_inf.output.find("0 segments") != std::string::npos);

    // inspect prints the architecture.
    auto ins = run_cli("inspect --model " + model.string());
    CHECK(ins.exit_code == 0);
    CHECK(ins.output.find("\"threshold\": 1.25") != std::string::npos);
    CHECK(ins.output.find("\"kind\": \"pool\"") != std::string::npos);

    // A corrupted checkpoint fails the CRC with exit code 4.
    auto bad = dir / "bad.sdd";
    {
        std::string bytes = read_file(model);
        bytes[bytes.size() / 2] ^= 0x01;
        std::ofstream out(bad, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    auto crc = run_cli("eval --model " + bad.string() + " --data " + data.string());
    CHECK(crc.exit_code == 4);

    // eval against a dataset directory with no manifest is a config error.
    auto empty = fresh_dir("sdd_cli_train_empty");
    auto noman = run_cli("eval --model " + model.string() + " --data " + empty.string());
    CHECK(noman.exit_code == 2);
}

TEST_CASE("inspect reports the full-scale parameter count") {
    auto dir = fresh_dir("sdd_cli_inspect");
    NetworkModel m = make_default_model(480, 640, 1);
    const auto path = dir / "full.sdd";
    save_checkpoint(m, path.string());
    auto res = run_cli("inspect --model " + path.string());
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("\"parameters\": 402128") != std::string::npos);
    CHECK(res.output.find("\"in\": 12558") != std::string::npos);
}
