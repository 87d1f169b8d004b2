#include "toll/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "toll/kernels.hpp"
#include "toll/rng.hpp"

namespace toll::metrics {

std::vector<int> kmeans(const Tensor& features, int k, uint64_t seed, int max_iters) {
    const int64_t n = features.rows();
    const int64_t d = features.cols();
    if (k < 1 || n < k) throw error("kmeans: need n >= K >= 1");
    Rng rng(seed);

    // k-means++ seeding.
    Tensor centroids = Tensor::zeros({k, d});
    std::vector<double> min_d2(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
    int64_t first = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(n)));
    std::copy_n(features.data.begin() + first * d, d, centroids.data.begin());
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (int64_t j = 0; j < d; ++j) {
                const double diff = features.at(i, j) - centroids.at(c - 1, j);
                s += diff * diff;
            }
            min_d2[static_cast<size_t>(i)] = std::min(min_d2[static_cast<size_t>(i)], s);
            total += min_d2[static_cast<size_t>(i)];
        }
        int64_t pick = 0;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double acc = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                acc += min_d2[static_cast<size_t>(i)];
                if (u < acc) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        } else {
            pick = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(n)));
        }
        std::copy_n(features.data.begin() + pick * d, d, centroids.data.begin() + c * d);
    }

    std::vector<int> assign(static_cast<size_t>(n), -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<int> next = kernels::assign_nearest(features, centroids);
        if (next == assign) break;
        assign = std::move(next);
        // Update step; empty clusters keep their previous centroid.
        Tensor sums = Tensor::zeros({k, d});
        std::vector<int64_t> counts(static_cast<size_t>(k), 0);
        for (int64_t i = 0; i < n; ++i) {
            const int c = assign[static_cast<size_t>(i)];
            counts[static_cast<size_t>(c)] += 1;
            for (int64_t j = 0; j < d; ++j) sums.at(c, j) += features.at(i, j);
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] == 0) continue;
            for (int64_t j = 0; j < d; ++j) {
                centroids.at(c, j) = sums.at(c, j) / static_cast<double>(counts[static_cast<size_t>(c)]);
            }
        }
    }
    if (assign[0] < 0) assign = kernels::assign_nearest(features, centroids);
    return assign;
}

namespace {

// Contingency counts with labels compacted to dense ranges.
struct Contingency {
    std::vector<std::vector<int64_t>> n;  // rows: y classes, cols: c clusters
    std::vector<int64_t> row_sums, col_sums;
    int64_t total = 0;
};

Contingency contingency(const std::vector<int>& y, const std::vector<int>& c) {
    if (y.size() != c.size()) throw error("metrics: label vectors differ in length");
    if (y.empty()) throw error("metrics: empty labels");
    std::map<int, int> ymap, cmap;
    for (int v : y) {
        if (v < 0) throw error("metrics: negative label");
        ymap.emplace(v, 0);
    }
    for (int v : c) {
        if (v < 0) throw error("metrics: negative label");
        cmap.emplace(v, 0);
    }
    int idx = 0;
    for (auto& [k, v] : ymap) v = idx++;
    idx = 0;
    for (auto& [k, v] : cmap) v = idx++;
    Contingency t;
    t.n.assign(ymap.size(), std::vector<int64_t>(cmap.size(), 0));
    t.row_sums.assign(ymap.size(), 0);
    t.col_sums.assign(cmap.size(), 0);
    t.total = static_cast<int64_t>(y.size());
    for (size_t i = 0; i < y.size(); ++i) {
        const int r = ymap[y[i]];
        const int cc = cmap[c[i]];
        t.n[static_cast<size_t>(r)][static_cast<size_t>(cc)] += 1;
        t.row_sums[static_cast<size_t>(r)] += 1;
        t.col_sums[static_cast<size_t>(cc)] += 1;
    }
    return t;
}

}  // namespace

std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    for (const auto& row : cost) {
        if (static_cast<int>(row.size()) != n) throw error("hungarian: matrix must be square");
    }
    // Potentials-based shortest augmenting path, 1-indexed internals.
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(static_cast<size_t>(n) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = p[static_cast<size_t>(j0)];
            double delta = std::numeric_limits<double>::infinity();
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = cost[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                                   u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        if (p[static_cast<size_t>(j)] > 0) row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
    }
    return row_to_col;
}

double cluster_acc(const std::vector<int>& y, const std::vector<int>& c) {
    const Contingency t = contingency(y, c);
    const int size = static_cast<int>(std::max(t.n.size(), t.n[0].size()));
    std::vector<std::vector<double>> cost(static_cast<size_t>(size), std::vector<double>(static_cast<size_t>(size), 0.0));
    for (size_t r = 0; r < t.n.size(); ++r) {
        for (size_t cc = 0; cc < t.n[0].size(); ++cc) {
            cost[r][cc] = -static_cast<double>(t.n[r][cc]);
        }
    }
    const auto match = hungarian_min_cost(cost);
    int64_t agreed = 0;
    for (size_t r = 0; r < t.n.size(); ++r) {
        const int col = match[r];
        if (col >= 0 && col < static_cast<int>(t.n[0].size())) agreed += t.n[r][static_cast<size_t>(col)];
    }
    return static_cast<double>(agreed) / static_cast<double>(t.total);
}

double nmi(const std::vector<int>& y, const std::vector<int>& c) {
    const Contingency t = contingency(y, c);
    const double n = static_cast<double>(t.total);
    auto entropy = [&](const std::vector<int64_t>& sums) {
        double h = 0.0;
        for (int64_t s : sums) {
            if (s == 0) continue;
            const double p = static_cast<double>(s) / n;
            h -= p * std::log(p);
        }
        return h;
    };
    const double hy = entropy(t.row_sums);
    const double hc = entropy(t.col_sums);
    if (hy == 0.0 && hc == 0.0) return 1.0;  // both single-cluster
    double mi = 0.0;
    for (size_t r = 0; r < t.n.size(); ++r) {
        for (size_t cc = 0; cc < t.n[0].size(); ++cc) {
            const int64_t nij = t.n[r][cc];
            if (nij == 0) continue;
            const double pij = static_cast<double>(nij) / n;
            const double pr = static_cast<double>(t.row_sums[r]) / n;
            const double pc = static_cast<double>(t.col_sums[cc]) / n;
            mi += pij * std::log(pij / (pr * pc));
        }
    }
    return 2.0 * mi / (hy + hc);
}

double ari(const std::vector<int>& y, const std::vector<int>& c) {
    if (y.size() < 2) throw error("ari: need at least 2 items");
    const Contingency t = contingency(y, c);
    auto choose2 = [](int64_t m) { return static_cast<double>(m) * (m - 1) / 2.0; };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (size_t r = 0; r < t.n.size(); ++r) {
        for (size_t cc = 0; cc < t.n[0].size(); ++cc) sum_ij += choose2(t.n[r][cc]);
    }
    for (int64_t s : t.row_sums) sum_a += choose2(s);
    for (int64_t s : t.col_sums) sum_b += choose2(s);
    const double pairs = choose2(t.total);
    const double expected = sum_a * sum_b / pairs;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both partitions trivial
    return (sum_ij - expected) / (max_index - expected);
}

LayoutError layout_error(const std::vector<std::pair<int, std::vector<scene::Vec3>>>& recovered,
                         const scene::SubgraphSample& gt) {
    LayoutError out;
    for (const auto& [id, cloud] : recovered) {
        const int idx = gt.node_index(id);
        if (idx < 0) throw error("layout_error: recovered node id not in ground truth");
        const auto& node = gt.nodes[static_cast<size_t>(idx)];
        const auto rec = scene::compute_descriptor(cloud);
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            const double diff = rec.centroid[a] - node.descriptor.centroid[a];
            d2 += diff * diff;
        }
        const double lr = std::max(rec.max_length, scene::kScaleFloor);
        const double lg = std::max(node.descriptor.max_length, scene::kScaleFloor);
        out.node_ids.push_back(id);
        out.centroid_dist.push_back(std::sqrt(d2));
        out.extent_log_err.push_back(std::fabs(std::log(lr / lg)));
    }
    if (out.node_ids.empty()) throw error("layout_error: nothing to compare");
    for (double v : out.centroid_dist) out.mean_centroid_dist += v;
    for (double v : out.extent_log_err) out.mean_extent_log_err += v;
    out.mean_centroid_dist /= static_cast<double>(out.centroid_dist.size());
    out.mean_extent_log_err /= static_cast<double>(out.extent_log_err.size());
    return out;
}

}  // namespace toll::metrics
