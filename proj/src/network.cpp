#include "sdd/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sdd {

void NetworkModel::validate() const {
    if (input.C <= 0 || input.H <= 0 || input.W <= 0) {
        throw ConfigError("model input geometry must be positive");
    }
    int flat_dim = -1;  // dimension entering the next dense layer, -1 before flatten
    int cur_C = input.C, cur_H = input.H, cur_W = input.W;
    size_t dense_seen = 0;
    bool seen_flatten = false;
    for (const auto& l : layers) {
        switch (l.kind) {
            case LayerKind::pool: {
                if (seen_flatten) throw ConfigError("pool layer after flatten");
                if (l.pool_k < 1) throw ConfigError("pool kernel must be >= 1");
                if (l.pool_k > cur_H && l.pool_k > cur_W) {
                    throw ConfigError("pool kernel exceeds both spatial dims");
                }
                auto [hp, wp] = pooled_dims(cur_H, cur_W, l.pool_k);
                cur_H = hp;
                cur_W = wp;
                break;
            }
            case LayerKind::flatten:
                seen_flatten = true;
                flat_dim = cur_C * cur_H * cur_W;
                break;
            case LayerKind::dense: {
                if (l.in <= 0 || l.out <= 0) throw ConfigError("dense dims must be positive");
                if (flat_dim < 0) throw ConfigError("dense layer before flatten");
                if (l.in != flat_dim) {
                    throw ConfigError("dense layer in_units " + std::to_string(l.in) +
                                      " does not chain from previous dimension " +
                                      std::to_string(flat_dim));
                }
                l.neuron.validate();
                if (l.dropout_p < 0 || l.dropout_p >= 1) {
                    throw ConfigError("dropout_p must be in [0,1)");
                }
                if (dense_seen >= weights.size() ||
                    weights[dense_seen].size() != static_cast<size_t>(l.in) * l.out) {
                    throw ConfigError("weight matrix missing or mis-shaped for dense layer " +
                                      std::to_string(dense_seen));
                }
                flat_dim = l.out;
                ++dense_seen;
                break;
            }
        }
    }
    if (dense_seen != weights.size()) {
        throw ConfigError("more weight matrices than dense layers");
    }
}

std::vector<LayerSpec> NetworkModel::dense_layers() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::dense) out.push_back(l);
    }
    return out;
}

int NetworkModel::pool_kernel() const {
    for (const auto& l : layers) {
        if (l.kind == LayerKind::pool) return l.pool_k;
    }
    return 1;
}

NetworkModel make_default_model(int H, int W, uint64_t seed) {
    constexpr int kPool = 7;
    auto [hp, wp] = pooled_dims(H, W, kPool);
    const int flat = 2 * hp * wp;

    LifParams p;  // defaults: threshold 1.25, decays 0.25 / 0.03, cuba
    NetworkModel m;
    m.input = {2, H, W};
    m.layers.push_back(LayerSpec::make_pool(kPool));
    m.layers.push_back(LayerSpec::make_flatten());
    m.layers.push_back(LayerSpec::make_dense(flat, 32, p, 0.05));
    m.layers.push_back(LayerSpec::make_dense(32, 8, p, 0.05));
    m.layers.push_back(LayerSpec::make_dense(8, 2, p, 0.05));

    std::mt19937_64 rng(seed);
    for (const auto& l : m.layers) {
        if (l.kind != LayerKind::dense) continue;
        const double b = std::sqrt(1.0 / l.in);
        std::uniform_real_distribution<double> dist(-b, b);
        std::vector<float> w(static_cast<size_t>(l.in) * l.out);
        for (auto& wi : w) wi = static_cast<float>(dist(rng));
        m.weights.push_back(std::move(w));
    }
    m.validate();
    return m;
}

int64_t count_params(const NetworkModel& model) {
    int64_t n = 0;
    for (const auto& l : model.layers) {
        if (l.kind == LayerKind::dense) n += static_cast<int64_t>(l.in) * l.out;
    }
    return n;
}

PooledTensor pool_forward(const SpikeTensor& spikes, int k) {
    if (k < 1) throw ConfigError("pool kernel must be >= 1");
    if (k > spikes.H && k > spikes.W) throw ConfigError("pool kernel exceeds both spatial dims");
    auto [hp, wp] = pooled_dims(spikes.H, spikes.W, k);

    PooledTensor out;
    out.T = spikes.T;
    out.C = spikes.C;
    out.H = hp;
    out.W = wp;
    out.data.assign(static_cast<size_t>(out.T) * out.C * hp * wp, 0.0);

    const double inv = 1.0 / (static_cast<double>(k) * k);
    for (int t = 0; t < spikes.T; ++t) {
        for (int c = 0; c < spikes.C; ++c) {
            for (int ho = 0; ho < hp; ++ho) {
                for (int wo = 0; wo < wp; ++wo) {
                    int count = 0;
                    const int h_end = std::min((ho + 1) * k, spikes.H);  // zero pad below
                    for (int h = ho * k; h < h_end; ++h) {
                        for (int w = wo * k; w < (wo + 1) * k; ++w) {
                            count += spikes.at(t, c, h, w);
                        }
                    }
                    out.data[((static_cast<size_t>(t) * out.C + c) * hp + ho) * wp + wo] =
                        count * inv;
                }
            }
        }
    }
    return out;
}

std::vector<double> pool_backward(const std::vector<double>& dpooled, int T, int C, int H,
                                  int W, int k) {
    auto [hp, wp] = pooled_dims(H, W, k);
    if (dpooled.size() != static_cast<size_t>(T) * C * hp * wp) {
        throw ShapeError("pool_backward: gradient shape mismatch");
    }
    std::vector<double> din(static_cast<size_t>(T) * C * H * W, 0.0);
    const double inv = 1.0 / (static_cast<double>(k) * k);
    for (int t = 0; t < T; ++t) {
        for (int c = 0; c < C; ++c) {
            for (int h = 0; h < H; ++h) {
                const int ho = h / k;
                for (int w = 0; w < wp * k; ++w) {
                    const int wo = w / k;
                    din[((static_cast<size_t>(t) * C + c) * H + h) * W + w] =
                        dpooled[((static_cast<size_t>(t) * C + c) * hp + ho) * wp + wo] * inv;
                }
            }
        }
    }
    return din;
}

std::vector<double> flatten(const PooledTensor& x) {
    // Layout is already [t][c][h][w] row-major, so this is a copy with the
    // per-timestep bijection made explicit.
    return x.data;
}

ForwardResult forward(const NetworkModel& model, const SpikeTensor& spikes, bool training,
                      uint64_t rng_seed) {
    if (spikes.C != model.input.C || spikes.H != model.input.H || spikes.W != model.input.W) {
        throw ShapeError("input spike tensor geometry does not match model");
    }
    auto dense = model.dense_layers();
    PooledTensor pooled = pool_forward(spikes, model.pool_kernel());
    std::vector<double> flat = flatten(pooled);
    std::vector<float> input(flat.begin(), flat.end());

    StackTrace<float> trace =
        forward_stack(dense, model.weights, std::move(input), spikes.T, SpikeGradMode::hard,
                      training, rng_seed);

    ForwardResult res;
    res.output = trace.record(dense, static_cast<int>(dense.size()) - 1);
    if (training) res.trace = std::move(trace);
    return res;
}

}  // namespace sdd
