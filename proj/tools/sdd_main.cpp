// sdd: event-stream simulation, synthetic data generation, training,
// evaluation and inference for the spiking distraction-detection engine.
//
// Exit codes: 0 ok, 2 config/usage error, 3 I/O error, 4 corrupt artifact,
// 5 refusing to overwrite an existing output.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdd/checkpoint.hpp"
#include "sdd/errors.hpp"
#include "sdd/events.hpp"
#include "sdd/evsim.hpp"
#include "sdd/network.hpp"
#include "sdd/synthgen.hpp"
#include "sdd/trainer.hpp"
#include "sdd/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string iso_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void ensure_writable(const fs::path& path, bool overwrite) {
    if (fs::exists(path) && !overwrite) {
        throw sdd::OverwriteError("output exists (pass --overwrite to replace): " +
                                  path.string());
    }
}

// Written atomically (tmp + rename) once a command completes.
void write_run_manifest(const fs::path& path, const std::string& command,
                        const json& effective_config, uint64_t seed,
                        const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs,
                        const std::string& started_at) {
    json m{{"command", command},
           {"config", effective_config},
           {"config_hash", fnv1a(effective_config.dump())},
           {"seed", seed},
           {"inputs", inputs},
           {"outputs", outputs},
           {"engine_version", sdd::kEngineVersion},
           {"started_at", started_at},
           {"finished_at", iso_now()}};
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw sdd::IoError("cannot write " + tmp.string());
        out << m.dump(2) << '\n';
    }
    fs::rename(tmp, path);
}

struct CommonTrainFlags {
    int64_t segment_us = 33000;
    int64_t dt_us = 1000;
    double r_true = 0.2;
    double r_false = 0.03;
    int window = 0;  // 0 = whole trial

    sdd::LossConfig loss_config() const {
        sdd::LossConfig cfg;
        cfg.target = sdd::RateTarget(r_true, r_false);
        if (window > 0) {
            cfg.mode = sdd::LossMode::moving_window;
            cfg.window_len = window;
        }
        return cfg;
    }
};

int cmd_simulate(const std::string& frames_dir, double fps, const std::string& out_path,
                 const std::string& format, double contrast, double eps, bool overwrite) {
    const std::string started = iso_now();
    ensure_writable(out_path, overwrite);
    sdd::FrameSequence seq = sdd::read_pgm_dir(frames_dir, fps);
    sdd::SimConfig cfg{contrast, eps};
    sdd::EventStream stream = sdd::simulate_events(seq, cfg);
    sdd::write_events(stream, out_path, sdd::event_format_from_string(format));

    json config{{"fps", fps}, {"format", format}, {"contrast_threshold", contrast}, {"eps", eps}};
    write_run_manifest(out_path + ".manifest.json", "simulate", config, 0, {frames_dir},
                       {out_path}, started);
    json report{{"events", stream.events.size()},
                {"duration_us", stream.duration_us},
                {"width", stream.width},
                {"height", stream.height}};
    std::cout << report.dump() << '\n';
    return 0;
}

int cmd_gen_synth(const std::string& config_path, const std::string& out_dir, uint64_t seed_flag,
                  bool seed_set, int n_streams, bool overwrite) {
    const std::string started = iso_now();
    sdd::SynthConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw sdd::IoError("cannot open " + config_path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        cfg = sdd::synth_config_from_json(text);
    }
    if (seed_set) cfg.seed = seed_flag;
    if (n_streams > 0) cfg.n_streams_per_class = n_streams;
    cfg.validate();

    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !overwrite) {
        throw sdd::OverwriteError("output directory is not empty: " + out_dir);
    }
    fs::create_directories(out_dir);

    auto streams = sdd::generate(cfg);
    json entries = json::array();
    for (const auto& ls : streams) {
        const std::string name = ls.id + ".evs";
        sdd::write_events(ls.stream, (fs::path(out_dir) / name).string(), sdd::EventFormat::bin);
        entries.push_back({{"path", name}, {"label", ls.label}, {"id", ls.id}});
    }
    const json config = json::parse(sdd::synth_config_to_json(cfg));
    json manifest{{"width", cfg.width},
                  {"height", cfg.height},
                  {"duration_us", cfg.stream_duration_us},
                  {"seed", cfg.seed},
                  {"config_hash", fnv1a(config.dump())},
                  {"streams", entries}};
    {
        std::ofstream out(fs::path(out_dir) / "manifest.json");
        out << manifest.dump(2) << '\n';
    }
    write_run_manifest(fs::path(out_dir) / "run_manifest.json", "gen-synth", config, cfg.seed,
                       config_path.empty() ? std::vector<std::string>{}
                                           : std::vector<std::string>{config_path},
                       {out_dir}, started);
    std::cout << json{{"streams", streams.size()}, {"out_dir", out_dir}}.dump() << '\n';
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& model_out,
              const std::string& metrics_out, const CommonTrainFlags& flags,
              sdd::OptimConfig opt, bool overwrite) {
    const std::string started = iso_now();
    ensure_writable(model_out, overwrite);
    const std::string metrics_path =
        metrics_out.empty() ? model_out + ".metrics.jsonl" : metrics_out;
    ensure_writable(metrics_path, overwrite);

    sdd::Dataset ds = sdd::load_dataset(data_dir, flags.segment_us, flags.dt_us, 7);
    if (ds.samples.empty()) throw sdd::ConfigError("dataset has no segments: " + data_dir);
    sdd::SplitDataset split = sdd::split_by_source(std::move(ds.samples), opt.seed);
    if (split.train.empty()) throw sdd::ConfigError("train split is empty");

    sdd::NetworkModel model = sdd::make_default_model(ds.height, ds.width, opt.seed);
    sdd::LossConfig loss_cfg = flags.loss_config();
    sdd::TrainResult result = sdd::train(model, split.train, split.val, loss_cfg, opt);

    sdd::save_checkpoint(result.model, model_out);
    {
        std::ofstream out(metrics_path);
        if (!out) throw sdd::IoError("cannot write " + metrics_path);
        out << sdd::metrics_to_jsonl(result.metrics);
    }

    json config{{"segment_us", flags.segment_us}, {"dt_us", flags.dt_us},
                {"r_true", flags.r_true},         {"r_false", flags.r_false},
                {"window", flags.window},         {"lr0", opt.lr0},
                {"decay_factor", opt.decay_factor}, {"decay_every", opt.decay_every},
                {"epochs", opt.epochs},           {"batch_size", opt.batch_size},
                {"seed", opt.seed},               {"deterministic", opt.deterministic}};
    write_run_manifest(model_out + ".manifest.json", "train", config, opt.seed, {data_dir},
                       {model_out, metrics_path}, started);

    json report{{"epochs", result.metrics.size()},
                {"best_epoch", result.best_epoch},
                {"train_samples", split.train.size()},
                {"val_samples", split.val.size()}};
    if (!result.metrics.empty()) {
        report["final_accuracy"] = result.metrics.back().accuracy;
        report["final_loss"] = result.metrics.back().mean_loss;
    }
    std::cout << report.dump() << '\n';
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_dir,
             const CommonTrainFlags& flags) {
    sdd::NetworkModel model = sdd::load_checkpoint(model_path);
    sdd::Dataset ds =
        sdd::load_dataset(data_dir, flags.segment_us, flags.dt_us, model.pool_kernel());
    if (ds.samples.empty()) throw sdd::ConfigError("dataset has no segments: " + data_dir);
    if (ds.width != model.input.W || ds.height != model.input.H) {
        throw sdd::ConfigError("dataset geometry does not match the checkpoint");
    }
    sdd::EpochMetrics m = sdd::evaluate(model, ds.samples, flags.loss_config());
    json report{{"accuracy", m.accuracy},
                {"mean_loss", m.mean_loss},
                {"samples", ds.samples.size()}};
    std::cout << report.dump() << '\n';
    return 0;
}

int cmd_infer(const std::string& model_path, const std::string& events_path,
              const std::string& format, const CommonTrainFlags& flags) {
    sdd::NetworkModel model = sdd::load_checkpoint(model_path);
    sdd::EventStream stream =
        sdd::read_events(events_path, sdd::event_format_from_string(format));
    if (static_cast<int>(stream.width) != model.input.W ||
        static_cast<int>(stream.height) != model.input.H) {
        throw sdd::ConfigError("stream geometry does not match the checkpoint");
    }
    const int64_t n_seg = static_cast<int64_t>(stream.duration_us / flags.segment_us);
    if (n_seg == 0) {
        std::cerr << "0 segments: stream shorter than one segment\n";
        return 0;
    }
    const auto dense = model.dense_layers();
    for (int64_t i = 0; i < n_seg; ++i) {
        sdd::PooledSample sample = sdd::pool_stream_window(
            stream, i * flags.segment_us, flags.segment_us, flags.dt_us, model.pool_kernel(),
            0, "");
        auto trace = sdd::forward_stack<float>(dense, model.weights, sample.to_input(),
                                               sample.T, sdd::SpikeGradMode::hard, false, 0);
        auto record = trace.record(dense, static_cast<int>(dense.size()) - 1);
        auto rates = sdd::spike_rate(record);
        json line{{"segment", i}, {"rates", rates}, {"class", sdd::classify(record)}};
        std::cout << line.dump() << '\n';
    }
    return 0;
}

int cmd_inspect(const std::string& model_path) {
    sdd::NetworkModel model = sdd::load_checkpoint(model_path);
    json layers = json::array();
    for (const auto& l : model.layers) {
        switch (l.kind) {
            case sdd::LayerKind::pool:
                layers.push_back({{"kind", "pool"}, {"kernel", l.pool_k}});
                break;
            case sdd::LayerKind::flatten:
                layers.push_back({{"kind", "flatten"}});
                break;
            case sdd::LayerKind::dense:
                layers.push_back({{"kind", "dense"},
                                  {"in", l.in},
                                  {"out", l.out},
                                  {"threshold", l.neuron.threshold},
                                  {"current_decay", l.neuron.current_decay},
                                  {"voltage_decay", l.neuron.voltage_decay},
                                  {"tau_grad", l.neuron.tau_grad},
                                  {"scale_grad", l.neuron.scale_grad},
                                  {"mode", l.neuron.mode == sdd::LifMode::cuba ? "cuba" : "single"},
                                  {"dropout_p", l.dropout_p}});
                break;
        }
    }
    json report{{"input", {{"C", model.input.C}, {"H", model.input.H}, {"W", model.input.W}}},
                {"layers", layers},
                {"parameters", sdd::count_params(model)}};
    std::cout << report.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spiking distraction-detection engine"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "convert a PGM frame directory to events");
    std::string sim_frames, sim_out, sim_format = "bin";
    double sim_fps = 30.0, sim_contrast = 0.2, sim_eps = 1e-3;
    bool sim_overwrite = false;
    sim->add_option("--frames", sim_frames, "directory of P5 .pgm frames")->required();
    sim->add_option("--fps", sim_fps, "frame rate of the sequence");
    sim->add_option("--out", sim_out, "output event file")->required();
    sim->add_option("--format", sim_format, "csv or bin");
    sim->add_option("--contrast", sim_contrast, "log-intensity contrast threshold");
    sim->add_option("--eps", sim_eps, "intensity floor before the log");
    sim->add_flag("--overwrite", sim_overwrite);

    // gen-synth
    auto* gen = app.add_subcommand("gen-synth", "generate a labeled synthetic event dataset");
    std::string gen_config, gen_out;
    uint64_t gen_seed = 0;
    int gen_streams = 0;
    bool gen_overwrite = false;
    gen->add_option("--config", gen_config, "JSON config (defaults when omitted)");
    gen->add_option("--out", gen_out, "output directory")->required();
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "overrides the config seed");
    gen->add_option("--streams", gen_streams, "streams per class (overrides config)");
    gen->add_flag("--overwrite", gen_overwrite);

    // shared train/eval/infer flags
    auto add_common = [](CLI::App* cmd, CommonTrainFlags& f) {
        cmd->add_option("--segment-us", f.segment_us, "segment length in microseconds");
        cmd->add_option("--dt-us", f.dt_us, "bin width in microseconds");
        cmd->add_option("--r-true", f.r_true, "target rate for the labeled class");
        cmd->add_option("--r-false", f.r_false, "target rate for other classes");
        cmd->add_option("--window", f.window, "moving-window length in bins (0 = whole trial)");
    };

    // train
    auto* tr = app.add_subcommand("train", "train on a generated dataset directory");
    std::string tr_data, tr_out, tr_metrics;
    CommonTrainFlags tr_flags;
    sdd::OptimConfig tr_opt;
    bool tr_overwrite = false;
    tr->add_option("--data", tr_data, "dataset directory (with manifest.json)")->required();
    tr->add_option("--out", tr_out, "output checkpoint path")->required();
    tr->add_option("--metrics", tr_metrics, "metrics JSONL path (default <out>.metrics.jsonl)");
    add_common(tr, tr_flags);
    tr->add_option("--epochs", tr_opt.epochs);
    tr->add_option("--lr", tr_opt.lr0);
    tr->add_option("--decay-factor", tr_opt.decay_factor);
    tr->add_option("--decay-every", tr_opt.decay_every);
    tr->add_option("--batch", tr_opt.batch_size);
    tr->add_option("--seed", tr_opt.seed);
    tr->add_option("--threads", tr_opt.threads, "0 = hardware count");
    tr->add_flag("--deterministic", tr_opt.deterministic, "single-threaded, reproducible");
    tr->add_flag("--overwrite", tr_overwrite);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset directory");
    std::string ev_model, ev_data;
    CommonTrainFlags ev_flags;
    ev->add_option("--model", ev_model)->required();
    ev->add_option("--data", ev_data)->required();
    add_common(ev, ev_flags);

    // infer
    auto* inf = app.add_subcommand("infer", "classify each segment of one event file");
    std::string inf_model, inf_events, inf_format = "bin";
    CommonTrainFlags inf_flags;
    inf->add_option("--model", inf_model)->required();
    inf->add_option("--events", inf_events)->required();
    inf->add_option("--format", inf_format, "csv or bin");
    add_common(inf, inf_flags);

    // inspect
    auto* ins = app.add_subcommand("inspect", "print checkpoint architecture and parameters");
    std::string ins_model;
    ins->add_option("--model", ins_model)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed()) {
            return cmd_simulate(sim_frames, sim_fps, sim_out, sim_format, sim_contrast, sim_eps,
                                sim_overwrite);
        }
        if (gen->parsed()) {
            return cmd_gen_synth(gen_config, gen_out, gen_seed, gen_seed_opt->count() > 0,
                                 gen_streams, gen_overwrite);
        }
        if (tr->parsed()) {
            return cmd_train(tr_data, tr_out, tr_metrics, tr_flags, tr_opt, tr_overwrite);
        }
        if (ev->parsed()) return cmd_eval(ev_model, ev_data, ev_flags);
        if (inf->parsed()) return cmd_infer(inf_model, inf_events, inf_format, inf_flags);
        if (ins->parsed()) return cmd_inspect(ins_model);
    } catch (const sdd::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const sdd::CorruptError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const sdd::OverwriteError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 5;
    } catch (const sdd::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
