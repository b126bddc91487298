#pragma once

#include <vector>

#include "sdd/errors.hpp"
#include "sdd/neuron.hpp"

namespace sdd {

// Class-dependent spike-rate targets: the labeled class should fire at r_true
// spikes per timestep, the others at r_false.
struct RateTarget {
    double r_true = 0.2;
    double r_false = 0.03;

    RateTarget() = default;
    RateTarget(double rt, double rf) : r_true(rt), r_false(rf) { validate(); }
    void validate() const {
        if (!(r_true > 0 && r_true <= 1)) throw ConfigError("r_true must be in (0,1]");
        if (!(r_false >= 0 && r_false < 1)) throw ConfigError("r_false must be in [0,1)");
        if (!(r_true > r_false)) throw ConfigError("r_true must exceed r_false");
    }
};

enum class LossMode { whole_trial, moving_window };

struct LossConfig {
    LossMode mode = LossMode::whole_trial;
    int window_len = 0;  // moving_window only
    RateTarget target;
};

std::vector<double> target_rates(int label, int n_classes, const RateTarget& target);

// Mean spikes per timestep per neuron.
template <typename Real>
std::vector<double> spike_rate(const SpikeRecord<Real>& rec) {
    if (rec.T <= 0) throw ConfigError("spike_rate on an empty record");
    std::vector<double> r(rec.n, 0.0);
    for (int t = 0; t < rec.T; ++t) {
        for (int i = 0; i < rec.n; ++i) r[i] += static_cast<double>(rec.spike(t, i));
    }
    for (double& ri : r) ri /= rec.T;
    return r;
}

struct LossResult {
    double loss = 0.0;
    // Whole-trial gradient d loss / d rate (averaged over windows in
    // moving_window mode).
    std::vector<double> dloss_drate;
    // Per-window gradients, moving_window mode only; window w ends at
    // timestep window_len - 1 + w.
    std::vector<std::vector<double>> window_grads;
};

namespace detail {
LossResult rate_loss(const std::vector<std::vector<double>>& window_rates,
                     const std::vector<double>& targets);
}

// SpikeRate loss, ½ ||r - r̂||² per window. whole_trial uses the single
// full-length window; moving_window slides a window_len window with stride 1
// and averages the per-window losses.
template <typename Real>
LossResult spike_rate_loss(const SpikeRecord<Real>& rec, int label, const LossConfig& cfg) {
    if (rec.T <= 0) throw ConfigError("spike_rate_loss on an empty record");
    cfg.target.validate();
    const int wl = cfg.mode == LossMode::whole_trial ? rec.T : cfg.window_len;
    if (wl < 1 || wl > rec.T) {
        throw ConfigError("window_len must be in [1, T]");
    }
    auto targets = target_rates(label, rec.n, cfg.target);

    const int n_windows = rec.T - wl + 1;
    std::vector<std::vector<double>> rates(n_windows, std::vector<double>(rec.n, 0.0));
    // Sliding sums over the spike record.
    std::vector<double> acc(rec.n, 0.0);
    for (int t = 0; t < rec.T; ++t) {
        for (int i = 0; i < rec.n; ++i) acc[i] += static_cast<double>(rec.spike(t, i));
        if (t >= wl) {
            for (int i = 0; i < rec.n; ++i) acc[i] -= static_cast<double>(rec.spike(t - wl, i));
        }
        if (t >= wl - 1) {
            for (int i = 0; i < rec.n; ++i) rates[t - wl + 1][i] = acc[i] / wl;
        }
    }
    LossResult res = detail::rate_loss(rates, targets);
    if (cfg.mode == LossMode::whole_trial) res.window_grads.clear();
    return res;
}

// Per-timestep d loss / d spike matrix, flat [t*n + i]; the form consumed by
// BPTT. Derived from the same windowed quadratic as spike_rate_loss.
template <typename Real>
std::vector<double> loss_grad_per_spike(const SpikeRecord<Real>& rec, int label,
                                        const LossConfig& cfg) {
    LossResult res = spike_rate_loss(rec, label, cfg);
    const int wl = cfg.mode == LossMode::whole_trial ? rec.T : cfg.window_len;
    const int n_windows = rec.T - wl + 1;
    std::vector<double> g(static_cast<size_t>(rec.T) * rec.n, 0.0);
    const auto& per_window =
        cfg.mode == LossMode::whole_trial
            ? std::vector<std::vector<double>>{res.dloss_drate}
            : res.window_grads;
    for (int w = 0; w < n_windows; ++w) {
        for (int t = w; t < w + wl; ++t) {
            for (int i = 0; i < rec.n; ++i) {
                g[static_cast<size_t>(t) * rec.n + i] += per_window[w][i] / (wl * double(n_windows));
            }
        }
    }
    return g;
}

// Argmax over spike rates; ties break toward the lower class index.
template <typename Real>
int classify(const SpikeRecord<Real>& rec) {
    auto r = spike_rate(rec);
    int best = 0;
    for (int i = 1; i < static_cast<int>(r.size()); ++i) {
        if (r[i] > r[best]) best = i;
    }
    return best;
}

}  // namespace sdd
