#include "sdd/loss.hpp"

namespace sdd {

std::vector<double> target_rates(int label, int n_classes, const RateTarget& target) {
    target.validate();
    if (label < 0 || label >= n_classes) {
        throw ConfigError("label " + std::to_string(label) + " out of range [0," +
                          std::to_string(n_classes) + ")");
    }
    std::vector<double> r(n_classes, target.r_false);
    r[label] = target.r_true;
    return r;
}

namespace detail {

LossResult rate_loss(const std::vector<std::vector<double>>& window_rates,
                     const std::vector<double>& targets) {
    LossResult res;
    const size_t n = targets.size();
    const size_t n_windows = window_rates.size();
    res.dloss_drate.assign(n, 0.0);
    res.window_grads.reserve(n_windows);
    for (const auto& r : window_rates) {
        std::vector<double> grad(n);
        double l = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double d = r[i] - targets[i];
            grad[i] = d;
            l += 0.5 * d * d;
        }
        res.loss += l;
        for (size_t i = 0; i < n; ++i) res.dloss_drate[i] += grad[i];
        res.window_grads.push_back(std::move(grad));
    }
    res.loss /= n_windows;
    for (double& g : res.dloss_drate) g /= n_windows;
    return res;
}

}  // namespace detail
}  // namespace sdd
