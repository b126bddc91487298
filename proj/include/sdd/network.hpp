#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sdd/errors.hpp"
#include "sdd/events.hpp"
#include "sdd/loss.hpp"
#include "sdd/neuron.hpp"

namespace sdd {

enum class LayerKind : uint8_t { pool = 0, flatten = 1, dense = 2 };

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    int pool_k = 0;                 // pool only
    int in = 0, out = 0;            // dense only
    LifParams neuron;               // dense only
    double dropout_p = 0.0;         // dense only

    static LayerSpec make_pool(int k) { return {LayerKind::pool, k, 0, 0, {}, 0.0}; }
    static LayerSpec make_flatten() { return {LayerKind::flatten, 0, 0, 0, {}, 0.0}; }
    static LayerSpec make_dense(int in, int out, LifParams p, double dropout) {
        return {LayerKind::dense, 0, in, out, p, dropout};
    }
};

struct InputGeometry {
    int C = 2;
    int H = 0;
    int W = 0;
};

// Non-overlapping k x k average pooling output dims: height is ceil-padded,
// width is floor-truncated.
inline std::pair<int, int> pooled_dims(int H, int W, int k) {
    return {(H + k - 1) / k, W / k};
}

// Ordered layer stack plus one out x in row-major weight matrix per dense
// layer. No biases.
struct NetworkModel {
    InputGeometry input;
    std::vector<LayerSpec> layers;
    std::vector<std::vector<float>> weights;  // parallel to dense layers, in order

    // Checks the pool -> flatten -> dense... chain and dimension agreement.
    void validate() const;
    std::vector<LayerSpec> dense_layers() const;
    int pool_kernel() const;
};

// The default stack: pool(7) -> flatten -> dense 32 -> dense 8 -> dense 2,
// with cuba neurons (threshold 1.25, current decay 0.25, voltage decay 0.03,
// tau_grad 0.03, scale_grad 3) and dropout 0.05. Weights uniform in
// [-sqrt(1/in), sqrt(1/in)], seeded.
NetworkModel make_default_model(int H, int W, uint64_t seed);

int64_t count_params(const NetworkModel& model);

// Real-valued pooled frames, flat layout [t][c][h'][w'].
struct PooledTensor {
    int T = 0, C = 0, H = 0, W = 0;
    std::vector<double> data;
    double at(int t, int c, int h, int w) const {
        return data[((static_cast<size_t>(t) * C + c) * H + h) * W + w];
    }
};

// Average pooling per timestep per channel; bottom rows zero-padded to a
// multiple of k, rightmost spare columns dropped.
PooledTensor pool_forward(const SpikeTensor& spikes, int k);

// Distributes an upstream gradient uniformly over each pooling window
// (1/k^2 per contributing input cell; truncated columns get zero).
std::vector<double> pool_backward(const std::vector<double>& dpooled, int T, int C, int H,
                                  int W, int k);

// Row-major flatten per timestep (c outermost, then h, then w): [T][C*H*W].
std::vector<double> flatten(const PooledTensor& x);

// How the threshold non-linearity is treated:
//  - hard: binary spikes forward, triangular surrogate backward, reset factor
//    detached (training mode).
//  - soft: the C1 soft_spike relaxation forward and its exact derivative
//    backward, reset differentiated in full. Used by finite-difference checks.
enum class SpikeGradMode { hard, soft };

template <typename Real>
struct StackTrace {
    int T = 0;
    std::vector<Real> input;                // [T][in0], stack input (post pool+flatten)
    std::vector<std::vector<Real>> masks;   // per dense layer: [in] dropout scale factors
    std::vector<std::vector<Real>> u;       // per layer [T][out], cuba only
    std::vector<std::vector<Real>> v_pre;   // per layer [T][out]
    std::vector<std::vector<Real>> s;       // per layer [T][out]

    SpikeRecord<Real> record(const std::vector<LayerSpec>& dense, int layer) const {
        SpikeRecord<Real> r;
        r.T = T;
        r.n = dense[layer].out;
        r.s = s[layer];
        r.v_pre = v_pre[layer];
        return r;
    }
};

namespace detail {

// One dense LIF layer over T timesteps. a: [T][in] input (pre-dropout),
// mask: [in] dropout scale or empty. Writes u/v_pre/s ([T][out]).
template <typename Real>
void dense_layer_forward(const LayerSpec& spec, const std::vector<Real>& w,
                         const Real* a, const Real* mask, int T, SpikeGradMode mode,
                         std::vector<Real>& u_out, std::vector<Real>& v_out,
                         std::vector<Real>& s_out) {
    const int in = spec.in, out = spec.out;
    const Real keep_u = Real(1) - static_cast<Real>(spec.neuron.current_decay);
    const Real keep_v = Real(1) - static_cast<Real>(spec.neuron.voltage_decay);
    const Real theta = static_cast<Real>(spec.neuron.threshold);
    const bool cuba = spec.neuron.mode == LifMode::cuba;

    u_out.assign(static_cast<size_t>(T) * out, Real(0));
    v_out.assign(static_cast<size_t>(T) * out, Real(0));
    s_out.assign(static_cast<size_t>(T) * out, Real(0));

    std::vector<Real> am(in);
    std::vector<Real> u(out, Real(0)), v_post(out, Real(0));
    for (int t = 0; t < T; ++t) {
        const Real* at = a + static_cast<size_t>(t) * in;
        if (mask) {
            for (int i = 0; i < in; ++i) am[i] = at[i] * mask[i];
        } else {
            for (int i = 0; i < in; ++i) am[i] = at[i];
        }
        for (int o = 0; o < out; ++o) {
            const Real* wrow = w.data() + static_cast<size_t>(o) * in;
            Real x = Real(0);
            for (int i = 0; i < in; ++i) x += wrow[i] * am[i];
            Real v_new;
            if (cuba) {
                u[o] = keep_u * u[o] + x;
                v_new = keep_v * v_post[o] + u[o];
            } else {
                v_new = keep_v * v_post[o] + x;
            }
            Real spike;
            if (mode == SpikeGradMode::hard) {
                spike = v_new >= theta ? Real(1) : Real(0);
            } else {
                spike = static_cast<Real>(soft_spike(static_cast<double>(v_new), spec.neuron));
            }
            v_post[o] = v_new * (Real(1) - spike);
            const size_t idx = static_cast<size_t>(t) * out + o;
            if (cuba) u_out[idx] = u[o];
            v_out[idx] = v_new;
            s_out[idx] = spike;
        }
    }
}

}  // namespace detail

// Runs the dense part of the network over a [T][in0] real input. Dropout
// masks (one per dense layer, fixed across timesteps) are drawn from
// mask_seed when training is true.
template <typename Real>
StackTrace<Real> forward_stack(const std::vector<LayerSpec>& dense,
                               const std::vector<std::vector<Real>>& weights,
                               std::vector<Real> input, int T, SpikeGradMode mode,
                               bool training, uint64_t mask_seed) {
    if (dense.empty()) throw ConfigError("forward_stack: no dense layers");
    if (weights.size() != dense.size()) throw ShapeError("weights/layer count mismatch");
    if (input.size() != static_cast<size_t>(T) * dense[0].in) {
        throw ShapeError("forward_stack: input size does not match first dense layer");
    }

    StackTrace<Real> trace;
    trace.T = T;
    trace.input = std::move(input);
    const size_t L = dense.size();
    trace.masks.resize(L);
    trace.u.resize(L);
    trace.v_pre.resize(L);
    trace.s.resize(L);

    std::mt19937_64 rng(mask_seed);
    for (size_t l = 0; l < L; ++l) {
        const auto& spec = dense[l];
        if (static_cast<size_t>(spec.in) * spec.out != weights[l].size()) {
            throw ShapeError("forward_stack: weight matrix shape mismatch at layer " +
                             std::to_string(l));
        }
        if (training && spec.dropout_p > 0.0) {
            std::bernoulli_distribution keep(1.0 - spec.dropout_p);
            std::vector<Real> mask(spec.in);
            const Real scale = static_cast<Real>(1.0 / (1.0 - spec.dropout_p));
            for (int i = 0; i < spec.in; ++i) mask[i] = keep(rng) ? scale : Real(0);
            trace.masks[l] = std::move(mask);
        }
        const Real* a = l == 0 ? trace.input.data() : trace.s[l - 1].data();
        detail::dense_layer_forward(spec, weights[l], a,
                                    trace.masks[l].empty() ? nullptr : trace.masks[l].data(),
                                    T, mode, trace.u[l], trace.v_pre[l], trace.s[l]);
    }
    return trace;
}

// Reverse-time, reverse-layer BPTT over a forward_stack trace.
// dloss_ds_out: [T][n_out] gradient w.r.t. the last layer's spikes.
// Returns one gradient matrix per dense layer (same shapes as weights).
template <typename Real>
std::vector<std::vector<Real>> backward_stack(const std::vector<LayerSpec>& dense,
                                              const std::vector<std::vector<Real>>& weights,
                                              const StackTrace<Real>& trace,
                                              const std::vector<Real>& dloss_ds_out,
                                              SpikeGradMode mode) {
    const size_t L = dense.size();
    if (trace.s.size() != L) throw ConfigError("backward_stack: trace does not match model");
    const int T = trace.T;
    if (dloss_ds_out.size() != static_cast<size_t>(T) * dense.back().out) {
        throw ShapeError("backward_stack: upstream gradient shape mismatch");
    }

    std::vector<std::vector<Real>> grads(L);
    std::vector<Real> ds = dloss_ds_out;  // [T][out] of current layer
    std::vector<Real> am;                 // masked input at one timestep

    for (size_t li = L; li-- > 0;) {
        const auto& spec = dense[li];
        const int in = spec.in, out = spec.out;
        const bool cuba = spec.neuron.mode == LifMode::cuba;
        const Real keep_u = Real(1) - static_cast<Real>(spec.neuron.current_decay);
        const Real keep_v = Real(1) - static_cast<Real>(spec.neuron.voltage_decay);
        const bool need_da = li > 0;

        grads[li].assign(static_cast<size_t>(out) * in, Real(0));
        std::vector<Real> ds_prev;
        if (need_da) ds_prev.assign(static_cast<size_t>(T) * in, Real(0));

        const Real* a = li == 0 ? trace.input.data() : trace.s[li - 1].data();
        const Real* mask = trace.masks[li].empty() ? nullptr : trace.masks[li].data();
        const auto& v_pre = trace.v_pre[li];
        const auto& s = trace.s[li];
        am.resize(in);

        std::vector<Real> lam_v_next(out, Real(0));  // d loss / d v_pre[t+1]
        std::vector<Real> lam_u_next(out, Real(0));  // d loss / d u[t+1]
        std::vector<Real> gx(out);
        for (int t = T - 1; t >= 0; --t) {
            const size_t row = static_cast<size_t>(t) * out;
            for (int o = 0; o < out; ++o) {
                const Real vp = v_pre[row + o];
                const Real g = static_cast<Real>(
                    surrogate_grad(static_cast<double>(vp), spec.neuron));
                // d loss / d v_post[t] arriving from the t+1 recurrence.
                const Real carry_v = keep_v * lam_v_next[o];
                Real dvpost_dvpre;
                if (mode == SpikeGradMode::hard) {
                    // Reset factor detached: multiply by (1 - s) with s constant.
                    dvpost_dvpre = Real(1) - s[row + o];
                } else {
                    dvpost_dvpre = (Real(1) - s[row + o]) - vp * g;
                }
                const Real lam_v = ds[row + o] * g + carry_v * dvpost_dvpre;
                lam_v_next[o] = lam_v;
                if (cuba) {
                    const Real lam_u = lam_v + keep_u * lam_u_next[o];
                    lam_u_next[o] = lam_u;
                    gx[o] = lam_u;
                } else {
                    gx[o] = lam_v;
                }
            }
            const Real* at = a + static_cast<size_t>(t) * in;
            if (mask) {
                for (int i = 0; i < in; ++i) am[i] = at[i] * mask[i];
            } else {
                for (int i = 0; i < in; ++i) am[i] = at[i];
            }
            for (int o = 0; o < out; ++o) {
                const Real go = gx[o];
                if (go == Real(0)) continue;
                Real* grow = grads[li].data() + static_cast<size_t>(o) * in;
                const Real* wrow = weights[li].data() + static_cast<size_t>(o) * in;
                if (need_da) {
                    Real* dat = ds_prev.data() + static_cast<size_t>(t) * in;
                    for (int i = 0; i < in; ++i) {
                        grow[i] += go * am[i];
                        dat[i] += go * wrow[i];
                    }
                } else {
                    for (int i = 0; i < in; ++i) grow[i] += go * am[i];
                }
            }
        }
        if (need_da) {
            // The previous layer's spikes were masked before the product.
            if (mask) {
                for (int t = 0; t < T; ++t) {
                    Real* dat = ds_prev.data() + static_cast<size_t>(t) * in;
                    for (int i = 0; i < in; ++i) dat[i] *= mask[i];
                }
            }
            ds = std::move(ds_prev);
        }
    }
    return grads;
}

// Full forward pass: pool -> flatten -> dense stack. Returns the output
// layer's record plus the trace when training.
struct ForwardResult {
    SpikeRecord<float> output;
    std::optional<StackTrace<float>> trace;
};

ForwardResult forward(const NetworkModel& model, const SpikeTensor& spikes, bool training,
                      uint64_t rng_seed);

}  // namespace sdd
