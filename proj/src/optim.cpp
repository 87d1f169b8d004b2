#include "toll/optim.hpp"

#include <cmath>

namespace toll {

void OptimizerConfig::validate() const {
    if (base_lr < 0.0) throw config_error("optimizer: lr must be >= 0");
    if (warmup_epochs < 0 || warmup_epochs > total_epochs) {
        throw config_error("optimizer: need 0 <= warmup_epochs <= total_epochs");
    }
}

void adamw_step(ParamStore& store, const GradMap& grads, const OptimizerConfig& cfg, double lr_now) {
    for (auto& e : store.entries()) {
        auto it = grads.find(e.name);
        if (it == grads.end()) continue;
        const Tensor& g = it->second;
        if (!g.same_shape(e.value)) throw shape_error("adamw: gradient shape mismatch for " + e.name);
        e.step += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(e.step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(e.step));
        for (size_t i = 0; i < e.value.data.size(); ++i) {
            const double gi = g.data[i];
            e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * gi;
            e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = e.m.data[i] / bc1;
            const double vhat = e.v.data[i] / bc2;
            e.value.data[i] -= lr_now * (mhat / (std::sqrt(vhat) + cfg.epsilon) + cfg.weight_decay * e.value.data[i]);
        }
    }
}

double cosine_lr(int epoch, const OptimizerConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.total_epochs) throw error("cosine_lr: epoch out of range");
    if (epoch < cfg.warmup_epochs) {
        return cfg.base_lr * static_cast<double>(epoch) / static_cast<double>(cfg.warmup_epochs);
    }
    const int denom = cfg.total_epochs - 1 - cfg.warmup_epochs;
    const double progress = denom > 0 ? static_cast<double>(epoch - cfg.warmup_epochs) / denom : 0.0;
    return cfg.base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

void clip_global_norm(GradMap& grads, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (const auto& [name, g] : grads) {
        for (double v : g.data) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double s = max_norm / norm;
    for (auto& [name, g] : grads) {
        for (double& v : g.data) v *= s;
    }
}

}  // namespace toll
