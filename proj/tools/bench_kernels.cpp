// Benchmark of the OpenMP kernels against their serial references, plus a
// bit-equality check on each measured case.
#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "toll/kernels.hpp"
#include "toll/rng.hpp"

using toll::Tensor;

namespace {

Tensor random_tensor(int64_t r, int64_t c, toll::Rng& rng) {
    Tensor t = Tensor::zeros({r, c});
    for (double& v : t.data) v = rng.normal();
    return t;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (size_t i = 0; i < a.data.size(); ++i) {
        if (a.data[i] != b.data[i]) return false;
    }
    return true;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; parallel variants run serially\n");
#endif
    toll::Rng rng(42);

    for (int64_t n : {64, 128, 256, 512}) {
        const Tensor a = random_tensor(n, n, rng);
        const Tensor b = random_tensor(n, n, rng);
        const Tensor ref = toll::kernels::matmul_serial(a, b);
        const Tensor par = toll::kernels::matmul_omp(a, b);
        const double ts = time_ms([&] { toll::kernels::matmul_serial(a, b); }, 5);
        const double tp = time_ms([&] { toll::kernels::matmul_omp(a, b); }, 5);
        std::printf("matmul %4ld x %4ld   serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   bit-equal %s\n",
                    static_cast<long>(n), static_cast<long>(n), ts, tp, ts / tp,
                    bit_equal(ref, par) ? "yes" : "NO");
    }

    for (int64_t n : {512, 1024, 2048}) {
        const Tensor pts = random_tensor(n, 3, rng);
        const auto ref = toll::kernels::knn_serial(pts, 16);
        const auto par = toll::kernels::knn_omp(pts, 16);
        const double ts = time_ms([&] { toll::kernels::knn_serial(pts, 16); }, 3);
        const double tp = time_ms([&] { toll::kernels::knn_omp(pts, 16); }, 3);
        const bool eq = ref.indices == par.indices && ref.mean_dist == par.mean_dist;
        std::printf("knn    %4ld pts k=16  serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   bit-equal %s\n",
                    static_cast<long>(n), ts, tp, ts / tp, eq ? "yes" : "NO");
    }

    for (int64_t n : {2048, 8192}) {
        const Tensor pts = random_tensor(n, 32, rng);
        const Tensor cent = random_tensor(12, 32, rng);
        const auto ref = toll::kernels::assign_nearest_serial(pts, cent);
        const auto par = toll::kernels::assign_nearest_omp(pts, cent);
        const double ts = time_ms([&] { toll::kernels::assign_nearest_serial(pts, cent); }, 5);
        const double tp = time_ms([&] { toll::kernels::assign_nearest_omp(pts, cent); }, 5);
        std::printf(
            "assign %4ld x 12      serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   bit-equal %s\n",
            static_cast<long>(n), ts, tp, ts / tp, ref == par ? "yes" : "NO");
    }
    return 0;
}
