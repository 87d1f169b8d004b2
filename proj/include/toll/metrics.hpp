#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "toll/scene.hpp"
#include "toll/tensor.hpp"

namespace toll::metrics {

// Lloyd iterations from a k-means++ seeding until the assignment reaches a
// fixpoint or max_iters; every cluster id lands in [0, k).
std::vector<int> kmeans(const Tensor& features, int k, uint64_t seed, int max_iters = 100);

// Hungarian-matched clustering accuracy over the (square-padded) contingency
// matrix.
double cluster_acc(const std::vector<int>& y, const std::vector<int>& c);

// 2 I(Y;C) / (H(Y)+H(C)) with natural logs; 1.0 when both partitions are a
// single cluster.
double nmi(const std::vector<int>& y, const std::vector<int>& c);

// Pair-counting adjusted Rand index; 1.0 when both partitions are trivial in
// the same way (the 0/0 case).
double ari(const std::vector<int>& y, const std::vector<int>& c);

// Min-cost assignment on a square matrix; returns column of each row.
std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost);

struct LayoutError {
    std::vector<int> node_ids;
    std::vector<double> centroid_dist;
    std::vector<double> extent_log_err;
    double mean_centroid_dist = 0.0;
    double mean_extent_log_err = 0.0;
};

// Per-node centroid distance and |log(L_rec / L_gt)| against the sample's
// stored descriptors; node correspondence is by id.
LayoutError layout_error(const std::vector<std::pair<int, std::vector<scene::Vec3>>>& recovered,
                         const scene::SubgraphSample& gt);

}  // namespace toll::metrics
