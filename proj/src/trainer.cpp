#include "sdd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_map>

#include <json.hpp>

#include "sdd/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sdd {

namespace {

uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int resolve_threads(int threads, bool deterministic) {
    if (deterministic) return 1;
    if (threads > 0) return threads;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

struct SampleResult {
    double loss = 0.0;
    int predicted = 0;
    std::vector<std::vector<float>> grads;  // empty in eval
};

SampleResult run_sample(const std::vector<LayerSpec>& dense,
                        const std::vector<std::vector<float>>& weights,
                        const PooledSample& sample, const LossConfig& loss_cfg, bool training,
                        uint64_t mask_seed) {
    auto trace = forward_stack<float>(dense, weights, sample.to_input(), sample.T,
                                      SpikeGradMode::hard, training, mask_seed);
    auto record = trace.record(dense, static_cast<int>(dense.size()) - 1);

    SampleResult res;
    res.predicted = classify(record);
    LossResult lr = spike_rate_loss(record, sample.label, loss_cfg);
    res.loss = lr.loss;
    if (training) {
        auto gd = loss_grad_per_spike(record, sample.label, loss_cfg);
        std::vector<float> ds(gd.begin(), gd.end());
        res.grads = backward_stack<float>(dense, weights, trace, ds, SpikeGradMode::hard);
    }
    return res;
}

}  // namespace

void OptimConfig::validate() const {
    if (lr0 <= 0) throw ConfigError("lr0 must be positive");
    if (decay_factor <= 0 || decay_factor >= 1) throw ConfigError("decay_factor must be in (0,1)");
    if (decay_every <= 0) throw ConfigError("decay_every must be positive");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (adam_beta1 <= 0 || adam_beta1 >= 1 || adam_beta2 <= 0 || adam_beta2 >= 1) {
        throw ConfigError("adam betas must be in (0,1)");
    }
    if (adam_eps <= 0) throw ConfigError("adam_eps must be positive");
}

AdamState AdamState::like(const std::vector<std::vector<float>>& weights) {
    AdamState s;
    for (const auto& w : weights) {
        s.m.emplace_back(w.size(), 0.0);
        s.v.emplace_back(w.size(), 0.0);
    }
    return s;
}

double lr_at(int epoch, const OptimConfig& cfg) {
    return cfg.lr0 * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
}

void adam_step(std::vector<std::vector<float>>& weights,
               const std::vector<std::vector<double>>& grads, AdamState& state, double lr,
               const OptimConfig& cfg) {
    if (grads.size() != weights.size() || state.m.size() != weights.size()) {
        throw ShapeError("adam_step: shape mismatch");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
    for (size_t l = 0; l < weights.size(); ++l) {
        if (grads[l].size() != weights[l].size()) throw ShapeError("adam_step: shape mismatch");
        for (size_t i = 0; i < weights[l].size(); ++i) {
            const double g = grads[l][i];
            if (!std::isfinite(g)) {
                throw TrainAbort("non-finite gradient at layer " + std::to_string(l));
            }
            double& m = state.m[l][i];
            double& v = state.v[l][i];
            m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
            v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            weights[l][i] = static_cast<float>(static_cast<double>(weights[l][i]) -
                                               lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps));
        }
    }
}

std::vector<float> PooledSample::to_input() const {
    std::vector<float> out(counts.size());
    for (size_t i = 0; i < counts.size(); ++i) {
        // Matches pool_forward: the average is formed in double, then narrowed.
        out[i] = static_cast<float>(static_cast<double>(counts[i]) * inv_kk);
    }
    return out;
}

PooledSample pool_stream_window(const EventStream& stream, int64_t t0_us, int64_t segment_us,
                                int64_t dt_us, int pool_k, int label,
                                const std::string& source_id) {
    if (segment_us <= 0 || dt_us <= 0 || segment_us % dt_us != 0) {
        throw ConfigError("segment_us must be a positive multiple of dt_us");
    }
    const int T = static_cast<int>(segment_us / dt_us);
    const int H = static_cast<int>(stream.height);
    const int W = static_cast<int>(stream.width);
    auto [hp, wp] = pooled_dims(H, W, pool_k);

    PooledSample s;
    s.T = T;
    s.n = 2 * hp * wp;
    s.inv_kk = 1.0 / (static_cast<double>(pool_k) * pool_k);
    s.label = label;
    s.source_id = source_id;
    s.counts.assign(static_cast<size_t>(T) * s.n, 0);

    // Dedup bitmap over [t][c][h][w]: binary clipping before the window sum.
    const size_t n_cells = static_cast<size_t>(T) * 2 * H * W;
    std::vector<uint64_t> seen((n_cells + 63) / 64, 0);

    const int64_t t_end = t0_us + segment_us;
    for (const Event& e : stream.events) {
        if (e.t_us < t0_us || e.t_us >= t_end) continue;
        const int t = static_cast<int>((e.t_us - t0_us) / dt_us);
        const size_t cell =
            ((static_cast<size_t>(t) * 2 + e.p) * H + e.y) * W + e.x;
        if (seen[cell >> 6] & (1ULL << (cell & 63))) continue;
        seen[cell >> 6] |= 1ULL << (cell & 63);
        const int wo = e.x / pool_k;
        if (wo >= wp) continue;  // truncated right columns
        const int ho = e.y / pool_k;
        s.counts[(static_cast<size_t>(t) * 2 + e.p) * hp * wp +
                 static_cast<size_t>(ho) * wp + wo] += 1;
    }
    return s;
}

PooledSample pool_segment(const Segment& seg, int pool_k) {
    const auto& sp = seg.spikes;
    auto [hp, wp] = pooled_dims(sp.H, sp.W, pool_k);
    PooledSample s;
    s.T = sp.T;
    s.n = sp.C * hp * wp;
    s.inv_kk = 1.0 / (static_cast<double>(pool_k) * pool_k);
    s.label = seg.label;
    s.source_id = seg.source_id;
    s.counts.assign(static_cast<size_t>(sp.T) * s.n, 0);
    for (int t = 0; t < sp.T; ++t) {
        for (int c = 0; c < sp.C; ++c) {
            for (int h = 0; h < sp.H; ++h) {
                for (int w = 0; w < wp * pool_k; ++w) {
                    if (sp.at(t, c, h, w)) {
                        s.counts[(static_cast<size_t>(t) * sp.C + c) * hp * wp +
                                 static_cast<size_t>(h / pool_k) * wp + w / pool_k] += 1;
                    }
                }
            }
        }
    }
    return s;
}

Dataset load_dataset(const std::string& dir, int64_t segment_us, int64_t dt_us, int pool_k) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    if (!fs::exists(manifest_path)) throw ConfigError("no manifest.json in " + dir);

    std::ifstream in(manifest_path);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptError(std::string("bad manifest.json: ") + e.what());
    }

    Dataset ds;
    ds.width = manifest.at("width").get<int>();
    ds.height = manifest.at("height").get<int>();
    const auto& streams = manifest.at("streams");
    if (streams.empty()) throw ConfigError("manifest lists no streams: " + dir);

    std::vector<std::vector<PooledSample>> per_stream(streams.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(streams.size()); ++i) {
        const auto& entry = streams[i];
        const std::string rel = entry.at("path").get<std::string>();
        const int label = entry.at("label").get<int>();
        const std::string id = entry.value("id", rel);
        EventStream s = read_events((fs::path(dir) / rel).string(), EventFormat::bin);
        const int64_t n_seg = static_cast<int64_t>(s.duration_us / segment_us);
        for (int64_t k = 0; k < n_seg; ++k) {
            per_stream[i].push_back(
                pool_stream_window(s, k * segment_us, segment_us, dt_us, pool_k, label, id));
        }
    }
    for (auto& v : per_stream) {
        for (auto& s : v) ds.samples.push_back(std::move(s));
    }
    return ds;
}

SplitDataset split_by_source(std::vector<PooledSample> samples, uint64_t seed,
                             double train_frac, double val_frac) {
    std::vector<std::string> ids;
    std::unordered_map<std::string, size_t> seen;
    for (const auto& s : samples) {
        if (seen.emplace(s.source_id, ids.size()).second) ids.push_back(s.source_id);
    }
    std::mt19937_64 rng(mix64(seed, 0x5e17a9d5ULL));
    std::shuffle(ids.begin(), ids.end(), rng);

    const size_t n = ids.size();
    const size_t n_train = static_cast<size_t>(std::llround(train_frac * n));
    const size_t n_val = static_cast<size_t>(std::llround(val_frac * n));
    std::unordered_map<std::string, int> bucket;  // 0 train, 1 val, 2 test
    for (size_t i = 0; i < n; ++i) bucket[ids[i]] = i < n_train ? 0 : i < n_train + n_val ? 1 : 2;

    SplitDataset out;
    for (auto& s : samples) {
        switch (bucket[s.source_id]) {
            case 0: out.train.push_back(std::move(s)); break;
            case 1: out.val.push_back(std::move(s)); break;
            default: out.test.push_back(std::move(s)); break;
        }
    }
    return out;
}

TrainResult train(const NetworkModel& model, const std::vector<PooledSample>& train_set,
                  const std::vector<PooledSample>& val_set, const LossConfig& loss_cfg,
                  const OptimConfig& opt_cfg) {
    opt_cfg.validate();
    model.validate();
    if (opt_cfg.epochs > 0 && train_set.empty()) throw ConfigError("empty training set");

    const auto dense = model.dense_layers();
    for (const auto& s : train_set) {
        if (s.n != dense[0].in || s.T <= 0) {
            throw ConfigError("training sample does not match model geometry");
        }
    }
    const int n_threads = resolve_threads(opt_cfg.threads, opt_cfg.deterministic);

    TrainResult result;
    result.model = model;
    NetworkModel current = model;
    AdamState adam = AdamState::like(current.weights);
    double best_acc = -1.0;

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < opt_cfg.epochs; ++epoch) {
        const auto t_start = std::chrono::steady_clock::now();
        const double lr = lr_at(epoch, opt_cfg);

        std::mt19937_64 shuffle_rng(mix64(opt_cfg.seed, 1000 + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        for (size_t batch_start = 0; batch_start < order.size();
             batch_start += opt_cfg.batch_size) {
            const size_t batch_end =
                std::min(order.size(), batch_start + opt_cfg.batch_size);
            const int bs = static_cast<int>(batch_end - batch_start);
            std::vector<SampleResult> results(bs);

#pragma omp parallel for schedule(dynamic) num_threads(n_threads)
            for (int b = 0; b < bs; ++b) {
                const size_t idx = order[batch_start + b];
                const uint64_t mask_seed = mix64(opt_cfg.seed, mix64(epoch, idx));
                results[b] = run_sample(dense, current.weights, train_set[idx], loss_cfg, true,
                                        mask_seed);
            }

            // Ordered reduction keeps results independent of thread count.
            std::vector<std::vector<double>> grads;
            for (const auto& w : current.weights) grads.emplace_back(w.size(), 0.0);
            for (int b = 0; b < bs; ++b) {
                if (!std::isfinite(results[b].loss)) throw TrainAbort("non-finite training loss");
                loss_sum += results[b].loss;
                for (size_t l = 0; l < grads.size(); ++l) {
                    for (size_t i = 0; i < grads[l].size(); ++i) {
                        grads[l][i] += results[b].grads[l][i];
                    }
                }
            }
            double norm_sq = 0.0;
            for (auto& g : grads) {
                for (double& gi : g) {
                    gi /= bs;
                    norm_sq += gi * gi;
                }
            }
            if (opt_cfg.clip_norm > 0 && norm_sq > opt_cfg.clip_norm * opt_cfg.clip_norm) {
                const double scale = opt_cfg.clip_norm / std::sqrt(norm_sq);
                for (auto& g : grads) {
                    for (double& gi : g) gi *= scale;
                }
            }
            adam_step(current.weights, grads, adam, lr, opt_cfg);
        }

        EpochMetrics m;
        m.epoch = epoch + 1;
        m.lr = lr;
        m.mean_loss = loss_sum / static_cast<double>(train_set.size());
        if (!val_set.empty()) {
            EpochMetrics val = evaluate(current, val_set, loss_cfg,
                                        opt_cfg.deterministic ? 1 : opt_cfg.threads);
            m.accuracy = val.accuracy;
        }
        m.wall_time_s =
            opt_cfg.deterministic
                ? 0.0
                : std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                      .count();
        result.metrics.push_back(m);

        if (m.accuracy > best_acc) {
            best_acc = m.accuracy;
            result.model = current;
            result.best_epoch = m.epoch;
        }
    }
    if (opt_cfg.epochs == 0) result.model = model;
    return result;
}

EpochMetrics evaluate(const NetworkModel& model, const std::vector<PooledSample>& dataset,
                      const LossConfig& loss_cfg, int threads) {
    if (dataset.empty()) throw ConfigError("evaluate on an empty dataset");
    const auto dense = model.dense_layers();
    const int n_threads = resolve_threads(threads, false);

    std::vector<double> losses(dataset.size());
    std::vector<int> correct(dataset.size());
#pragma omp parallel for schedule(dynamic) num_threads(n_threads)
    for (long i = 0; i < static_cast<long>(dataset.size()); ++i) {
        SampleResult r = run_sample(dense, model.weights, dataset[i], loss_cfg, false, 0);
        losses[i] = r.loss;
        correct[i] = r.predicted == dataset[i].label ? 1 : 0;
    }
    EpochMetrics m;
    m.mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / dataset.size();
    m.accuracy = std::accumulate(correct.begin(), correct.end(), 0.0) / dataset.size();
    return m;
}

std::string metrics_to_jsonl(const std::vector<EpochMetrics>& metrics) {
    std::string out;
    for (const auto& m : metrics) {
        nlohmann::json j{{"epoch", m.epoch},
                         {"mean_loss", m.mean_loss},
                         {"accuracy", m.accuracy},
                         {"lr", m.lr},
                         {"wall_time_s", m.wall_time_s}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace sdd
