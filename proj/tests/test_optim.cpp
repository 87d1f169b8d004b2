#include <doctest.h>

#include <cmath>

#include "toll/optim.hpp"
#include "toll/rng.hpp"

using namespace toll;

namespace {
ParamStore one_param(double v0, double v1) {
    ParamStore ps;
    Tensor t = Tensor::zeros({1, 2});
    t.data = {v0, v1};
    ps.create("w", t);
    return ps;
}
}  // namespace

TEST_CASE("adamw: zero grad, zero decay leaves parameters unchanged") {
    ParamStore ps = one_param(1.5, -2.5);
    OptimizerConfig cfg;
    cfg.weight_decay = 0.0;
    GradMap g;
    g["w"] = Tensor::zeros({1, 2});
    adamw_step(ps, g, cfg, 1e-3);
    CHECK(ps.value("w").data[0] == 1.5);
    CHECK(ps.value("w").data[1] == -2.5);
}

TEST_CASE("adamw: lr = 0 leaves parameters bit-identical") {
    ParamStore ps = one_param(0.25, -0.125);
    OptimizerConfig cfg;
    GradMap g;
    g["w"] = Tensor::full({1, 2}, 3.0);
    adamw_step(ps, g, cfg, 0.0);
    CHECK(ps.value("w").data[0] == 0.25);
    CHECK(ps.value("w").data[1] == -0.125);
}

TEST_CASE("adamw: one step matches the closed form") {
    ParamStore ps = one_param(1.0, 2.0);
    OptimizerConfig cfg;  // defaults: lr handled below, wd=1e-4, betas .9/.999
    GradMap grads;
    Tensor g = Tensor::zeros({1, 2});
    g.data = {0.5, -1.0};
    grads["w"] = g;
    const double lr = 1e-3;
    adamw_step(ps, grads, cfg, lr);
    for (int i = 0; i < 2; ++i) {
        const double gi = g.data[static_cast<size_t>(i)];
        const double m = (1.0 - cfg.beta1) * gi;
        const double v = (1.0 - cfg.beta2) * gi * gi;
        const double mhat = m / (1.0 - cfg.beta1);
        const double vhat = v / (1.0 - cfg.beta2);
        const double p0 = i == 0 ? 1.0 : 2.0;
        const double expect = p0 - lr * (mhat / (std::sqrt(vhat) + cfg.epsilon) + cfg.weight_decay * p0);
        CHECK(ps.value("w").data[static_cast<size_t>(i)] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("adamw: parameters without grads stay untouched, no decay") {
    ParamStore ps = one_param(4.0, -4.0);
    OptimizerConfig cfg;
    GradMap g;  // empty
    adamw_step(ps, g, cfg, 1e-3);
    CHECK(ps.value("w").data[0] == 4.0);
    CHECK(ps.value("w").data[1] == -4.0);
    CHECK(ps.entry("w").step == 0);
}

TEST_CASE("cosine schedule shape") {
    OptimizerConfig cfg;
    cfg.base_lr = 1e-3;
    cfg.warmup_epochs = 5;
    cfg.total_epochs = 30;
    CHECK(cosine_lr(0, cfg) == 0.0);
    CHECK(cosine_lr(5, cfg) == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(cosine_lr(29, cfg) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_lr(2, cfg) == doctest::Approx(1e-3 * 2.0 / 5.0).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_lr(30, cfg), error);
    CHECK_THROWS_AS(cosine_lr(-1, cfg), error);
}

TEST_CASE("global norm clip") {
    GradMap g;
    g["a"] = Tensor::full({1, 2}, 3.0);
    g["b"] = Tensor::full({1, 2}, 4.0);  // global norm = sqrt(2*9+2*16) = sqrt(50)
    clip_global_norm(g, 1.0);
    double sq = 0.0;
    for (const auto& [k, t] : g) {
        for (double v : t.data) sq += v * v;
    }
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));
    // Below the threshold nothing changes.
    GradMap h;
    h["a"] = Tensor::full({1, 1}, 0.5);
    clip_global_norm(h, 1.0);
    CHECK(h["a"].data[0] == 0.5);
}

TEST_CASE("param store round-trips through tensor files") {
    ParamStore ps = one_param(1.0, 2.0);
    Rng rng(5);
    Tensor big = Tensor::zeros({7, 3});
    for (double& v : big.data) v = rng.normal();
    ps.create("big", big);

    std::vector<std::pair<std::string, Tensor>> tensors;
    for (const auto& e : ps.entries()) tensors.emplace_back(e.name, e.value);
    const std::string path = "test_store.toll";
    write_tensor_file(path, tensors);
    const auto back = read_tensor_file(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].first == "w");
    CHECK(back[1].first == "big");
    CHECK(back[1].second.data == big.data);
    std::remove(path.c_str());
}
