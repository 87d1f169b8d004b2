#include <doctest.h>

#include <limits>

#include "toll/tensor.hpp"

using toll::Tensor;

TEST_CASE("tensor construction and access") {
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.size() == 6);
    t.at(1, 2) = 5.0;
    CHECK(t.data[5] == 5.0);
    CHECK(Tensor::full({2, 2}, 3.0).data[3] == 3.0);
    CHECK(Tensor::scalar(7.0).size() == 1);
}

TEST_CASE("finiteness guard") {
    Tensor t = Tensor::zeros({1, 2});
    CHECK_NOTHROW(t.check_finite("ok"));
    t.data[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(t.check_finite("bad"), toll::numeric_error);
    t.data[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(t.check_finite("bad"), toll::numeric_error);
}
