#pragma once

#include <cstdint>
#include <vector>

#include "toll/tensor.hpp"

namespace toll::starve {

enum class Regime { kMulti, kSingle };

// Linearized two-pathway model: prediction = A_prior * theta_node +
// A_topo * theta_edge, squared loss against `target`, with per-pathway
// learning-rate gains acting as preconditioners of the gradient flow.
struct LinearPathwayModel {
    Regime regime = Regime::kMulti;
    double lambda_prior = 1.0;
    double lambda_topo = 0.1;
    Tensor a_prior;  // m x p_node
    Tensor a_topo;   // m x p_edge
    Tensor target;   // m x 1
    double ceiling = 0.0;  // best-case prior-only residual (single regime)

    int dim() const { return static_cast<int>(target.rows()); }
};

// Multi regime: the prior pathway spans the whole target space (ceiling 0).
// Single regime: the prior collapses to one translation direction and the
// target keeps a fixed residual C = 0.8 away from it.
LinearPathwayModel build_model(Regime regime, double lambda_prior, double lambda_topo, uint64_t seed);

struct FlowTrajectory {
    std::vector<double> time;
    std::vector<double> residual_norm;
    std::vector<double> cum_edge_update;  // integral of ||d theta_edge / dt||
    double final_residual = 0.0;
    double final_cum_update = 0.0;
    double prior_only_residual = 0.0;  // residual of the prior-optimal projection at the end
};

// Largest admissible Euler step: 1 / (2 * max effective gain).
double stability_dt_bound(const LinearPathwayModel& model);

// Explicit Euler integration of the preconditioned gradient flow; rejects
// unstable dt with the computed bound.
FlowTrajectory simulate_flow(const LinearPathwayModel& model, double dt, double t_end);

struct ScalingResult {
    std::vector<double> lambda_priors;
    std::vector<double> cum_updates;      // trial means
    std::vector<double> final_residuals;  // trial means
    double slope = 0.0;                   // log-log least-squares fit
};

// Sweeps lambda_prior at fixed lambda_topo, averaging over `trials` seeded
// models; dt and the horizon are chosen from the stability bound and the
// slowest mode. Needs >= 3 gains spanning >= 2 decades.
ScalingResult starvation_scaling(const std::vector<double>& lambda_priors, double lambda_topo,
                                 int trials, Regime regime, uint64_t seed = 1);

}  // namespace toll::starve
