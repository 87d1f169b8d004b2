#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "toll/common.hpp"

namespace toll {

// Dense row-major 64-bit float tensor. Everything in the pipeline is one- or
// two-dimensional; higher ranks are not needed.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int64_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, double value);
    static Tensor scalar(double value) { return Tensor({1, 1}, {value}); }

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int64_t rows() const { return shape.empty() ? 0 : shape[0]; }
    int64_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;

    // Throws numeric_error naming `what` if any entry is NaN/Inf.
    void check_finite(const std::string& what) const;
};

}  // namespace toll
