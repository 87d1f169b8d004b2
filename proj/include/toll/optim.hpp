#pragma once

#include "toll/param_store.hpp"
#include "toll/tape.hpp"

namespace toll {

struct OptimizerConfig {
    double base_lr = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int warmup_epochs = 5;
    int total_epochs = 150;
    double clip_norm = 0.0;  // 0 disables the global-norm clip

    void validate() const;
};

// Decoupled AdamW with bias correction. Parameters absent from `grads` are
// left untouched (no decay either).
void adamw_step(ParamStore& store, const GradMap& grads, const OptimizerConfig& cfg, double lr_now);

// Linear warm-up to base_lr, then cosine decay reaching 0 at the last epoch.
double cosine_lr(int epoch, const OptimizerConfig& cfg);

// Scales all grads in place so the global L2 norm is at most max_norm.
void clip_global_norm(GradMap& grads, double max_norm);

}  // namespace toll
