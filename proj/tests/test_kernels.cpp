#include <doctest.h>

#include "toll/kernels.hpp"
#include "toll/rng.hpp"

using namespace toll;

namespace {
Tensor rand_t(int64_t r, int64_t c, uint64_t seed) {
    Rng rng(seed);
    Tensor t = Tensor::zeros({r, c});
    for (double& v : t.data) v = rng.normal();
    return t;
}
}  // namespace

TEST_CASE("matmul serial and omp are bit-equal across shapes and transposes") {
    for (uint64_t seed : {1, 2, 3}) {
        const Tensor a = rand_t(17, 9, seed);
        const Tensor b = rand_t(9, 13, seed + 10);
        const Tensor at = rand_t(9, 17, seed + 20);
        const Tensor bt = rand_t(13, 9, seed + 30);
        CHECK(kernels::matmul_serial(a, b).data == kernels::matmul_omp(a, b).data);
        CHECK(kernels::matmul_serial(at, b, true, false).data == kernels::matmul_omp(at, b, true, false).data);
        CHECK(kernels::matmul_serial(a, bt, false, true).data == kernels::matmul_omp(a, bt, false, true).data);
        CHECK(kernels::matmul_serial(at, bt, true, true).data == kernels::matmul_omp(at, bt, true, true).data);
    }
}

TEST_CASE("matmul matches a naive reference") {
    const Tensor a = rand_t(5, 4, 7);
    const Tensor b = rand_t(4, 6, 8);
    const Tensor c = kernels::matmul(a, b);
    for (int64_t i = 0; i < 5; ++i) {
        for (int64_t j = 0; j < 6; ++j) {
            double s = 0.0;
            for (int64_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
            CHECK(c.at(i, j) == doctest::Approx(s).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(kernels::matmul(a, rand_t(5, 5, 9)), shape_error);
}

TEST_CASE("knn variants agree and exclude self") {
    const Tensor pts = rand_t(64, 3, 11);
    const auto s = kernels::knn_serial(pts, 5);
    const auto p = kernels::knn_omp(pts, 5);
    CHECK(s.indices == p.indices);
    CHECK(s.mean_dist == p.mean_dist);
    for (int64_t i = 0; i < 64; ++i) {
        for (int k = 0; k < 5; ++k) CHECK(s.indices[static_cast<size_t>(i * 5 + k)] != i);
    }
    CHECK_THROWS_AS(kernels::knn(rand_t(4, 3, 1), 4), error);
}

TEST_CASE("assign_nearest variants agree and tie-break to the lowest index") {
    const Tensor pts = rand_t(100, 4, 13);
    const Tensor cent = rand_t(7, 4, 14);
    CHECK(kernels::assign_nearest_serial(pts, cent) == kernels::assign_nearest_omp(pts, cent));

    Tensor p2 = Tensor::zeros({1, 1});
    Tensor c2 = Tensor::zeros({2, 1});  // both centroids identical
    CHECK(kernels::assign_nearest(p2, c2)[0] == 0);
}

TEST_CASE("pairwise sqdist agrees between variants") {
    const Tensor a = rand_t(20, 3, 15);
    const Tensor b = rand_t(30, 3, 16);
    CHECK(kernels::pairwise_sqdist_serial(a, b).data == kernels::pairwise_sqdist_omp(a, b).data);
}
