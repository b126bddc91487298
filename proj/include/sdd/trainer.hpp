#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdd/loss.hpp"
#include "sdd/network.hpp"

namespace sdd {

struct OptimConfig {
    double lr0 = 0.1;
    double decay_factor = 0.1;
    int decay_every = 4;
    int epochs = 30;
    int batch_size = 16;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 10.0;  // global L2 gradient clip
    uint64_t seed = 0;
    int threads = 0;           // 0 = hardware concurrency
    bool deterministic = false;

    void validate() const;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    int64_t t = 0;

    static AdamState like(const std::vector<std::vector<float>>& weights);
};

struct EpochMetrics {
    int epoch = 0;        // 1-based
    double mean_loss = 0;  // mean training loss over the epoch (eval loss in evaluate())
    double accuracy = 0;   // fraction correct on the evaluated split
    double lr = 0;
    double wall_time_s = 0;
};

// Step schedule: lr0 * decay_factor^floor(epoch / decay_every), epoch 0-based.
double lr_at(int epoch, const OptimConfig& cfg);

// Standard Adam with bias correction, applied in-place to float weights with
// double moment accumulators. Throws TrainAbort on non-finite gradients.
void adam_step(std::vector<std::vector<float>>& weights,
               const std::vector<std::vector<double>>& grads, AdamState& state, double lr,
               const OptimConfig& cfg);

// One pooled, flattened sample: u8 window counts scaled by 1/k^2 at use.
// counts layout [t][c][h'][w'], n = C*H'*W' values per timestep.
struct PooledSample {
    int T = 0;
    int n = 0;
    std::vector<uint8_t> counts;
    double inv_kk = 1.0;
    int label = 0;
    std::string source_id;

    std::vector<float> to_input() const;
};

// Bins one segment window of a stream straight into pooled counts
// (binary-clipped per pixel per bin, then summed per k x k window).
// Bit-exact with pool_forward(bin_to_spikes(...)).
PooledSample pool_stream_window(const EventStream& stream, int64_t t0_us, int64_t segment_us,
                                int64_t dt_us, int pool_k, int label,
                                const std::string& source_id);

PooledSample pool_segment(const Segment& seg, int pool_k);

struct Dataset {
    int width = 0;
    int height = 0;
    std::vector<PooledSample> samples;
};

// Reads a synthgen output directory (manifest.json + event files) and pools
// every 33 ms-style segment.
Dataset load_dataset(const std::string& dir, int64_t segment_us, int64_t dt_us, int pool_k);

struct SplitDataset {
    std::vector<PooledSample> train, val, test;
};

// 70/15/15 split by source_id: no segments of one stream land in two splits.
SplitDataset split_by_source(std::vector<PooledSample> samples, uint64_t seed,
                             double train_frac = 0.70, double val_frac = 0.15);

struct TrainResult {
    NetworkModel model;  // best-accuracy weights (ties to the earlier epoch)
    std::vector<EpochMetrics> metrics;
    int best_epoch = 0;  // 1-based, 0 when no epochs ran
};

TrainResult train(const NetworkModel& model, const std::vector<PooledSample>& train_set,
                  const std::vector<PooledSample>& val_set, const LossConfig& loss_cfg,
                  const OptimConfig& opt_cfg);

// Dropout off; accuracy = fraction of samples with classify(output) == label.
EpochMetrics evaluate(const NetworkModel& model, const std::vector<PooledSample>& dataset,
                      const LossConfig& loss_cfg, int threads = 0);

// JSON-lines serialization of per-epoch metrics (one object per line).
std::string metrics_to_jsonl(const std::vector<EpochMetrics>& metrics);

}  // namespace sdd
