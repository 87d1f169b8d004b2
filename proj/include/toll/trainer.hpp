#pragma once

#include <optional>
#include <string>
#include <vector>

#include "toll/config.hpp"
#include "toll/metrics.hpp"
#include "toll/scene.hpp"

namespace toll::train {

struct MetricsRow {
    int epoch = 0;
    double loss_gen = 0.0;
    double loss_distill = 0.0;
    double lr = 0.0;
    double nmi_obj = 0.0;
    double ari_obj = 0.0;
    double acc_obj = 0.0;
    double nmi_edge = 0.0;
    double ari_edge = 0.0;
    double acc_edge = 0.0;
    double layout_centroid_err = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& r);

struct Dataset {
    std::vector<scene::SubgraphSample> samples;
};

// Synthesizes scenes and converts them to subgraph samples per the config;
// truncated at max_samples when set.
Dataset generate_dataset(const RunConfig& cfg);
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

struct TrainState {
    ParamStore student;
    ParamStore teacher;
    sma::DistillBank bank;
    int epoch = 0;  // completed epochs
    double last_loss_gen = 0.0;
    double last_loss_distill = 0.0;

    explicit TrainState(const RunConfig& cfg);
};

TrainState init_state(const RunConfig& cfg);
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path, const RunConfig& cfg);

// Trains from state.epoch to cfg.epochs; evaluation rows at every epoch
// divisible by eval_every. Deterministic for a fixed config seed, including
// across checkpoint/resume splits.
std::vector<MetricsRow> run_pretrain(const RunConfig& cfg, const Dataset& ds, TrainState& state);

// Convenience: pretrain + write metrics CSV and checkpoint under out_dir.
std::vector<MetricsRow> run_pretrain_to_dir(const RunConfig& cfg, const Dataset& ds, TrainState& state,
                                            bool append_csv = false);

struct EvalOutput {
    double nmi_obj = 0.0, ari_obj = 0.0, acc_obj = 0.0;
    double nmi_edge = 0.0, ari_edge = 0.0, acc_edge = 0.0;
    Tensor emb_obj, emb_edge;
    std::vector<int> labels_obj, labels_edge;
    std::vector<int> assign_obj, assign_edge;
};

// Frozen-encoder evaluation: anchor-free propagation, K-Means with K = the
// number of distinct ground-truth labels, Hungarian ACC / NMI / ARI.
EvalOutput evaluate(const RunConfig& cfg, const Dataset& ds, const ParamStore& params,
                    uint64_t kmeans_seed);

struct RecoverOutput {
    std::vector<std::pair<int, std::vector<scene::Vec3>>> clouds;  // node id -> points
    metrics::LayoutError err;
};

// Anchors per the sample, propagates, reverse-samples every node.
RecoverOutput run_recover(const RunConfig& cfg, const scene::SubgraphSample& sample,
                          const ParamStore& params, uint64_t seed,
                          std::optional<int> points_per_node = std::nullopt);

// Mean recovered-centroid error over the first `count` samples (point count
// capped for speed; feeds the metrics column).
double layout_probe(const RunConfig& cfg, const Dataset& ds, const ParamStore& params, int count,
                    uint64_t seed);

}  // namespace toll::train
