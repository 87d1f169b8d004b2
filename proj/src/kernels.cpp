#include "toll/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace toll::kernels {

namespace {
std::atomic<bool> g_parallel{true};

// Below this many multiply-adds the fork/join overhead dominates.
constexpr int64_t kParallelFlopThreshold = 1 << 15;

void check_matmul_shapes(const Tensor& a, const Tensor& b, bool ta, bool tb, int64_t& m, int64_t& k,
                         int64_t& n) {
    const int64_t am = ta ? a.cols() : a.rows();
    const int64_t ak = ta ? a.rows() : a.cols();
    const int64_t bk = tb ? b.cols() : b.rows();
    const int64_t bn = tb ? b.rows() : b.cols();
    if (ak != bk) {
        throw shape_error("matmul: inner dimensions differ " + a.shape_str() + " vs " + b.shape_str());
    }
    m = am;
    k = ak;
    n = bn;
}

// B comes pre-transposed where needed, so the inner loop is always a
// vectorizable row accumulation over contiguous memory.
inline void matmul_row(const Tensor& a, const Tensor& b, bool ta, int64_t k, int64_t n, int64_t i,
                       double* out_row) {
    const double* ad = a.data.data();
    const double* bd = b.data.data();
    const int64_t a_cols = a.cols();
    const int64_t b_cols = b.cols();
    for (int64_t j = 0; j < n; ++j) out_row[j] = 0.0;
    for (int64_t p = 0; p < k; ++p) {
        const double av = ta ? ad[p * a_cols + i] : ad[i * a_cols + p];
        const double* brow = bd + p * b_cols;
        for (int64_t j = 0; j < n; ++j) out_row[j] += av * brow[j];
    }
}

Tensor transpose(const Tensor& t) {
    Tensor out = Tensor::zeros({t.cols(), t.rows()});
    for (int64_t r = 0; r < t.rows(); ++r) {
        for (int64_t c = 0; c < t.cols(); ++c) out.at(c, r) = t.at(r, c);
    }
    return out;
}
}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }

namespace {
bool machine_has_threads() {
#ifdef _OPENMP
    static const bool multi = omp_get_max_threads() > 1;
    return multi;
#else
    return false;
#endif
}
}  // namespace

bool parallel_enabled() { return g_parallel.load() && machine_has_threads(); }

Tensor matmul_serial(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    int64_t m, k, n;
    check_matmul_shapes(a, b, ta, tb, m, k, n);
    const Tensor* bp = &b;
    Tensor bt;
    if (tb) {
        bt = transpose(b);
        bp = &bt;
    }
    Tensor c = Tensor::zeros({m, n});
    for (int64_t i = 0; i < m; ++i) matmul_row(a, *bp, ta, k, n, i, c.data.data() + i * n);
    return c;
}

Tensor matmul_omp(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    int64_t m, k, n;
    check_matmul_shapes(a, b, ta, tb, m, k, n);
    const Tensor* bp = &b;
    Tensor bt;
    if (tb) {
        bt = transpose(b);
        bp = &bt;
    }
    Tensor c = Tensor::zeros({m, n});
    double* cd = c.data.data();
    const Tensor& bref = *bp;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) matmul_row(a, bref, ta, k, n, i, cd + i * n);
    return c;
}

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    int64_t m, k, n;
    check_matmul_shapes(a, b, ta, tb, m, k, n);
    if (parallel_enabled() && m * k * n >= kParallelFlopThreshold) return matmul_omp(a, b, ta, tb);
    return matmul_serial(a, b, ta, tb);
}

namespace {
inline void sqdist_row(const Tensor& a, const Tensor& b, int64_t i, double* out_row) {
    const int64_t d = a.cols();
    const int64_t m = b.rows();
    const double* arow = a.data.data() + i * d;
    for (int64_t j = 0; j < m; ++j) {
        const double* brow = b.data.data() + j * d;
        double s = 0.0;
        for (int64_t c = 0; c < d; ++c) {
            const double diff = arow[c] - brow[c];
            s += diff * diff;
        }
        out_row[j] = s;
    }
}
}  // namespace

Tensor pairwise_sqdist_serial(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) throw shape_error("pairwise_sqdist: column mismatch");
    Tensor out = Tensor::zeros({a.rows(), b.rows()});
    for (int64_t i = 0; i < a.rows(); ++i) sqdist_row(a, b, i, out.data.data() + i * b.rows());
    return out;
}

Tensor pairwise_sqdist_omp(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) throw shape_error("pairwise_sqdist: column mismatch");
    Tensor out = Tensor::zeros({a.rows(), b.rows()});
    double* od = out.data.data();
    const int64_t m = b.rows();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < a.rows(); ++i) sqdist_row(a, b, i, od + i * m);
    return out;
}

Tensor pairwise_sqdist(const Tensor& a, const Tensor& b) {
    if (parallel_enabled() && a.rows() * b.rows() * a.cols() >= kParallelFlopThreshold) {
        return pairwise_sqdist_omp(a, b);
    }
    return pairwise_sqdist_serial(a, b);
}

namespace {
inline void knn_row(const Tensor& points, int k, int64_t i, int* idx_out, double* mean_out) {
    const int64_t n = points.rows();
    const int64_t d = points.cols();
    // Partial selection over (distance, index) pairs keeps ties deterministic.
    std::vector<std::pair<double, int>> cand;
    cand.reserve(static_cast<size_t>(n - 1));
    const double* pi = points.data.data() + i * d;
    for (int64_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double* pj = points.data.data() + j * d;
        double s = 0.0;
        for (int64_t c = 0; c < d; ++c) {
            const double diff = pi[c] - pj[c];
            s += diff * diff;
        }
        cand.emplace_back(s, static_cast<int>(j));
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    double acc = 0.0;
    for (int t = 0; t < k; ++t) {
        idx_out[t] = cand[static_cast<size_t>(t)].second;
        acc += std::sqrt(cand[static_cast<size_t>(t)].first);
    }
    *mean_out = acc / k;
}
}  // namespace

KnnResult knn_serial(const Tensor& points, int k) {
    const int64_t n = points.rows();
    if (k < 1 || n <= k) throw error("knn: need more points than neighbors");
    KnnResult res;
    res.indices.resize(static_cast<size_t>(n) * k);
    res.mean_dist.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) knn_row(points, k, i, res.indices.data() + i * k, &res.mean_dist[static_cast<size_t>(i)]);
    return res;
}

KnnResult knn_omp(const Tensor& points, int k) {
    const int64_t n = points.rows();
    if (k < 1 || n <= k) throw error("knn: need more points than neighbors");
    KnnResult res;
    res.indices.resize(static_cast<size_t>(n) * k);
    res.mean_dist.resize(static_cast<size_t>(n));
    int* idx = res.indices.data();
    double* md = res.mean_dist.data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) knn_row(points, k, i, idx + i * k, md + i);
    return res;
}

KnnResult knn(const Tensor& points, int k) {
    if (parallel_enabled() && points.rows() * points.rows() >= kParallelFlopThreshold) {
        return knn_omp(points, k);
    }
    return knn_serial(points, k);
}

namespace {
inline int nearest_centroid(const Tensor& points, const Tensor& centroids, int64_t i) {
    const int64_t kc = centroids.rows();
    const int64_t d = points.cols();
    const double* p = points.data.data() + i * d;
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (int64_t j = 0; j < kc; ++j) {
        const double* c = centroids.data.data() + j * d;
        double s = 0.0;
        for (int64_t t = 0; t < d; ++t) {
            const double diff = p[t] - c[t];
            s += diff * diff;
        }
        if (s < best) {
            best = s;
            best_j = static_cast<int>(j);
        }
    }
    return best_j;
}
}  // namespace

std::vector<int> assign_nearest_serial(const Tensor& points, const Tensor& centroids) {
    if (points.cols() != centroids.cols()) throw shape_error("assign_nearest: column mismatch");
    std::vector<int> out(static_cast<size_t>(points.rows()));
    for (int64_t i = 0; i < points.rows(); ++i) out[static_cast<size_t>(i)] = nearest_centroid(points, centroids, i);
    return out;
}

std::vector<int> assign_nearest_omp(const Tensor& points, const Tensor& centroids) {
    if (points.cols() != centroids.cols()) throw shape_error("assign_nearest: column mismatch");
    std::vector<int> out(static_cast<size_t>(points.rows()));
    int* od = out.data();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < points.rows(); ++i) od[i] = nearest_centroid(points, centroids, i);
    return out;
}

std::vector<int> assign_nearest(const Tensor& points, const Tensor& centroids) {
    if (parallel_enabled() && points.rows() * centroids.rows() * points.cols() >= kParallelFlopThreshold) {
        return assign_nearest_omp(points, centroids);
    }
    return assign_nearest_serial(points, centroids);
}

}  // namespace toll::kernels
