#pragma once

#include <array>
#include <string>
#include <vector>

#include "toll/scene.hpp"
#include "toll/tape.hpp"

namespace toll::diffusion {

struct DiffusionSchedule {
    int steps = 0;
    std::vector<double> alpha;      // alpha[t-1] is the per-step coefficient
    std::vector<double> alpha_bar;  // running product, strictly decreasing
};

enum class ScheduleKind { kLinearBeta, kCosine };
ScheduleKind schedule_kind_from_string(const std::string& s);

DiffusionSchedule build_schedule(int steps, ScheduleKind kind);

struct NaflConfig {
    int k = 16;
    double alpha = 20.0;  // density scale, 1/m
    double beta = 0.8;    // structural mix
    double w_min = 0.1;
    double w_max = 1.2;
    double eps = 1e-8;      // eigen floor in the sphericity ratio
    bool per_node = false;  // KNN over each node instead of the merged cloud

    void validate() const;
};

struct DiffusionConfig {
    int steps = 100;
    ScheduleKind kind = ScheduleKind::kLinearBeta;
    int hidden = 64;
    static constexpr int kTimeDim = 16;

    void validate() const;
};

// Denoiser parameters: a per-point MLP over [point(3) | time emb | condition].
void make_params(ParamStore& store, int cond_dim, const DiffusionConfig& cfg, Rng& rng);

std::array<double, DiffusionConfig::kTimeDim> time_embedding(int t);

// X^t = sqrt(abar_t) X0 + sqrt(1 - abar_t) eps, elementwise.
std::vector<scene::Vec3> forward_noise(const std::vector<scene::Vec3>& x0, int t,
                                       const std::vector<scene::Vec3>& eps,
                                       const DiffusionSchedule& schedule);

// Eigenvalues (ascending, clamped at 0) of the local covariance of each
// point's K nearest neighbors, plus the mean neighbor distance.
struct LocalGeometry {
    std::vector<std::array<double, 3>> eigenvalues;
    std::vector<double> mean_knn_dist;
};
LocalGeometry local_covariance_eigs(const std::vector<scene::Vec3>& points, int k);

std::vector<double> nafl_weights(const std::vector<scene::Vec3>& points, const NaflConfig& cfg);

// Noise prediction for a batch of per-node point arrays laid out contiguously
// (seg_lens rows per node). `cond` is the |V| x d latent; taus holds one
// diffusion step per node.
Val predict_noise(Tape& t, const Tensor& noisy, const std::vector<int>& seg_lens,
                  const std::vector<int>& taus, Val cond, const ParamStore& ps,
                  const DiffusionConfig& cfg);

// One (tau, eps) draw per node; loss = mean over nodes of mean over points of
// w_i ||eps - eps_hat||^2 with NAFL weights from the clean cloud held
// constant.
Val gen_loss(Tape& t, const scene::SubgraphSample& sample, Val cond, const DiffusionSchedule& schedule,
             const NaflConfig& nafl, const DiffusionConfig& cfg, const ParamStore& ps, uint64_t seed);

// Ancestral DDPM sampling conditioned per node; returns absolute-frame
// clouds with the given per-node point counts.
std::vector<std::vector<scene::Vec3>> reverse_sample(const std::vector<int>& points_per_node,
                                                     const Tensor& cond, const DiffusionSchedule& schedule,
                                                     const DiffusionConfig& cfg, const ParamStore& ps,
                                                     uint64_t seed);

}  // namespace toll::diffusion
