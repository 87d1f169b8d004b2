#pragma once

#include <cstdint>
#include <vector>

#include "toll/tensor.hpp"

namespace toll::kernels {

// Data-parallel inner loops, each in two variants: a serial reference and an
// OpenMP version parallelized over output elements. Per output element the
// arithmetic order is identical in both, so results are bit-equal regardless
// of thread count. The unsuffixed entry points dispatch to OpenMP when the
// problem is large enough and threading is enabled.

void set_parallel(bool enabled);
bool parallel_enabled();

// C = op(A) * op(B); trans flags select A^T / B^T. Shapes are validated.
Tensor matmul_serial(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
Tensor matmul_omp(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

// Squared Euclidean distances between rows of a (n x d) and rows of b (m x d).
Tensor pairwise_sqdist_serial(const Tensor& a, const Tensor& b);
Tensor pairwise_sqdist_omp(const Tensor& a, const Tensor& b);
Tensor pairwise_sqdist(const Tensor& a, const Tensor& b);

// K nearest neighbors of every row of `points` among the other rows (self
// excluded), by Euclidean distance with (distance, index) tie order.
// Returns indices (n x k) and the mean neighbor distance per row.
struct KnnResult {
    std::vector<int> indices;        // n * k, row-major
    std::vector<double> mean_dist;   // n
};
KnnResult knn_serial(const Tensor& points, int k);
KnnResult knn_omp(const Tensor& points, int k);
KnnResult knn(const Tensor& points, int k);

// Nearest-centroid assignment for every row of `points` (ties to the lowest
// centroid index).
std::vector<int> assign_nearest_serial(const Tensor& points, const Tensor& centroids);
std::vector<int> assign_nearest_omp(const Tensor& points, const Tensor& centroids);
std::vector<int> assign_nearest(const Tensor& points, const Tensor& centroids);

}  // namespace toll::kernels
