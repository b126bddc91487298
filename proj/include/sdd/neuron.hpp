#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sdd/errors.hpp"

namespace sdd {

enum class LifMode { single, cuba };

// ϑ / decay constants of a LIF population plus the surrogate-derivative shape
// used on the training side. Decays are per timestep.
struct LifParams {
    double threshold = 1.25;
    double current_decay = 0.25;  // cuba mode only
    double voltage_decay = 0.03;
    double tau_grad = 0.03;
    double scale_grad = 3.0;
    LifMode mode = LifMode::cuba;

    void validate() const {
        if (threshold <= 0) throw ConfigError("threshold must be positive");
        if (voltage_decay < 0 || voltage_decay > 1) throw ConfigError("voltage_decay outside [0,1]");
        if (current_decay < 0 || current_decay > 1) throw ConfigError("current_decay outside [0,1]");
        if (tau_grad <= 0) throw ConfigError("tau_grad must be positive");
        if (scale_grad <= 0) throw ConfigError("scale_grad must be positive");
    }
};

// Per-neuron state. u is the synaptic current (cuba mode only), v the
// membrane potential. After a step in which neuron i spiked, v[i] == 0.
template <typename Real>
struct LifState {
    std::vector<Real> u;
    std::vector<Real> v;

    static LifState zeros(size_t n) {
        LifState s;
        s.u.assign(n, Real(0));
        s.v.assign(n, Real(0));
        return s;
    }
};

// Spikes and pre-reset potentials for a T-step run, flat layout [t*n + i].
// s holds binary values in hard mode and graded values in soft mode.
template <typename Real>
struct SpikeRecord {
    int T = 0;
    int n = 0;
    std::vector<Real> s;
    std::vector<Real> v_pre;

    Real spike(int t, int i) const { return s[static_cast<size_t>(t) * n + i]; }
    Real potential(int t, int i) const { return v_pre[static_cast<size_t>(t) * n + i]; }
};

// Triangular pseudo-derivative of the spike threshold: peak scale_grad at ϑ,
// support [ϑ - tau_grad, ϑ + tau_grad].
inline double surrogate_grad(double v, const LifParams& p) {
    double d = 1.0 - std::abs(v - p.threshold) / p.tau_grad;
    return d > 0 ? p.scale_grad * d : 0.0;
}

template <typename Real>
std::vector<Real> surrogate_grad(const std::vector<Real>& v_pre_reset, const LifParams& p) {
    std::vector<Real> g(v_pre_reset.size());
    for (size_t i = 0; i < g.size(); ++i) {
        g[i] = static_cast<Real>(surrogate_grad(static_cast<double>(v_pre_reset[i]), p));
    }
    return g;
}

// Antiderivative of surrogate_grad: a smooth (C1) spike relaxation used by the
// gradient-check path. Ranges over [0, scale_grad * tau_grad], saturating
// outside the surrogate support.
inline double soft_spike(double v, const LifParams& p) {
    double z = v - p.threshold;
    if (z <= -p.tau_grad) return 0.0;
    if (z >= p.tau_grad) return p.scale_grad * p.tau_grad;
    if (z <= 0) {
        double d = z + p.tau_grad;
        return p.scale_grad * d * d / (2.0 * p.tau_grad);
    }
    return p.scale_grad * (p.tau_grad / 2.0 + z - z * z / (2.0 * p.tau_grad));
}

template <typename Real>
struct LifStepResult {
    LifState<Real> state;
    std::vector<Real> spikes;
    std::vector<Real> v_pre_reset;
};

// One LIF update over a population: decay + integrate (Eq. style
// v' = (1-a_v) v + x, with a cascaded current stage in cuba mode), inclusive
// threshold, multiplicative hard reset of v. u is never reset.
template <typename Real>
LifStepResult<Real> lif_step(const LifState<Real>& state, const std::vector<Real>& x,
                             const LifParams& p) {
    if (x.size() != state.v.size() || (p.mode == LifMode::cuba && state.u.size() != x.size())) {
        throw ShapeError("lif_step: state and input dimensions disagree");
    }
    const size_t n = x.size();
    LifStepResult<Real> r;
    r.state.u.resize(n);
    r.state.v.resize(n);
    r.spikes.resize(n);
    r.v_pre_reset.resize(n);

    const Real keep_v = Real(1) - static_cast<Real>(p.voltage_decay);
    const Real keep_u = Real(1) - static_cast<Real>(p.current_decay);
    const Real theta = static_cast<Real>(p.threshold);

    for (size_t i = 0; i < n; ++i) {
        Real v_new;
        if (p.mode == LifMode::cuba) {
            Real u_new = keep_u * state.u[i] + x[i];
            r.state.u[i] = u_new;
            v_new = keep_v * state.v[i] + u_new;
        } else {
            r.state.u[i] = Real(0);
            v_new = keep_v * state.v[i] + x[i];
        }
        Real spike = v_new >= theta ? Real(1) : Real(0);
        r.v_pre_reset[i] = v_new;
        r.spikes[i] = spike;
        r.state.v[i] = v_new * (Real(1) - spike);
    }
    return r;
}

// T-fold composition of lif_step; records spikes and pre-reset potentials.
template <typename Real>
SpikeRecord<Real> lif_run(const std::vector<std::vector<Real>>& x_seq, const LifParams& p,
                          LifState<Real> initial) {
    SpikeRecord<Real> rec;
    rec.T = static_cast<int>(x_seq.size());
    rec.n = static_cast<int>(initial.v.size());
    rec.s.reserve(static_cast<size_t>(rec.T) * rec.n);
    rec.v_pre.reserve(static_cast<size_t>(rec.T) * rec.n);

    LifState<Real> state = std::move(initial);
    for (const auto& x : x_seq) {
        auto step = lif_step(state, x, p);
        state = std::move(step.state);
        rec.s.insert(rec.s.end(), step.spikes.begin(), step.spikes.end());
        rec.v_pre.insert(rec.v_pre.end(), step.v_pre_reset.begin(), step.v_pre_reset.end());
    }
    return rec;
}

}  // namespace sdd
