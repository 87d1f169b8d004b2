#pragma once

#include <string>

#include "toll/actgr.hpp"
#include "toll/diffusion.hpp"
#include "toll/optim.hpp"
#include "toll/sma.hpp"

namespace toll {

// Flat `key = value` configuration with dotted keys. Every key has a
// documented default; unknown keys are hard errors. Two presets ship:
// "desk" (the default, laptop-scale) and "reference" (the full-scale
// hyperparameters).
struct RunConfig {
    // run.*
    uint64_t seed = 0;
    int epochs = 30;
    int batch = 8;
    int eval_every = 10;
    std::string out_dir = "out";

    // data.*
    std::string data_dir = "data";
    int scenes = 140;
    int objects = 8;
    int points_per_object = 64;
    int noise_clusters = 0;
    int tau_pts = 64;
    int k_min = 3;
    double rho_min = 0.0;
    double rho_max = 0.5;
    double workspace = 6.0;
    int categories = 6;
    int max_samples = 0;  // 0 = keep all

    actgr::ActgrConfig actgr;
    actgr::AnchorMode anchor_mode;
    diffusion::DiffusionConfig diff;
    diffusion::NaflConfig nafl;
    sma::SmaConfig sma;
    OptimizerConfig opt;

    int eval_kmeans_iters = 100;
    int recover_samples = 4;  // samples used for the layout-error column

    RunConfig();
    static RunConfig preset(const std::string& name);

    // Parses a config file (comments with '#', blank lines allowed) and then
    // applies overrides; both go through apply_kv.
    void apply_file(const std::string& path);
    void apply_kv(const std::string& key, const std::string& value);
    void validate() const;

    std::string anchor_mode_string() const;
};

// Every accepted config key, for CLI flag mirroring.
const std::vector<std::string>& config_keys();

std::string views_to_string(const std::vector<sma::ViewSpec>& views);
std::vector<sma::ViewSpec> views_from_string(const std::string& s);
std::string pairs_to_string(const std::vector<std::pair<std::string, std::string>>& pairs);
std::vector<std::pair<std::string, std::string>> pairs_from_string(const std::string& s);

}  // namespace toll
