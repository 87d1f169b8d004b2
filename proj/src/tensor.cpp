#include "toll/tensor.hpp"

#include <cmath>

namespace toll {

static int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw shape_error("negative dimension");
        n *= d;
    }
    return n;
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    const int64_t n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
    const int64_t n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), value));
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

void Tensor::check_finite(const std::string& what) const {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw numeric_error("non-finite value in " + what);
        }
    }
}

}  // namespace toll
