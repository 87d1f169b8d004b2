#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "toll/common.hpp"
#include "toll/config.hpp"
#include "toll/scene_io.hpp"
#include "toll/starvation.hpp"
#include "toll/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAcceptance = 3;
constexpr int kExitNumeric = 4;

// Merge order: preset -> config file -> mirrored --key flags.
struct ConfigArgs {
    std::string preset = "desk";
    std::string config_file;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "Config preset: desk or reference");
        cmd->add_option("--config", config_file, "Config file (key = value lines)");
        for (const auto& key : toll::config_keys()) {
            auto* opt = cmd->add_option(
                "--" + key, [this, key](const CLI::results_t& res) {
                    overrides[key] = res.at(0);
                    return true;
                },
                "Override config key " + key);
            opt->type_name("VALUE");
        }
    }

    toll::RunConfig build() const {
        toll::RunConfig cfg = toll::RunConfig::preset(preset);
        if (!config_file.empty()) cfg.apply_file(config_file);
        for (const auto& [k, v] : overrides) cfg.apply_kv(k, v);
        cfg.validate();
        return cfg;
    }
};

toll::train::Dataset obtain_dataset(const toll::RunConfig& cfg, bool generate_if_missing) {
    if (fs::is_directory(cfg.data_dir)) return toll::train::load_dataset(cfg.data_dir);
    if (!generate_if_missing) throw toll::error("dataset directory not found: " + cfg.data_dir);
    auto ds = toll::train::generate_dataset(cfg);
    toll::train::write_dataset(ds, cfg.data_dir);
    return ds;
}

int cmd_gen_data(const ConfigArgs& cargs, bool write_scenes) {
    auto cfg = cargs.build();
    const auto ds = toll::train::generate_dataset(cfg);
    toll::train::write_dataset(ds, cfg.out_dir);
    if (write_scenes) {
        toll::scene::SceneSpec spec;
        spec.num_objects = cfg.objects;
        spec.points_per_object = cfg.points_per_object;
        spec.noise_clusters = cfg.noise_clusters;
        spec.workspace_extent = cfg.workspace;
        spec.num_categories = cfg.categories;
        toll::Rng master(cfg.seed);
        for (int i = 0; i < cfg.scenes; ++i) {
            const uint64_t scene_seed = master.fork(7, static_cast<uint64_t>(i)).next_u64();
            char name[32];
            std::snprintf(name, sizeof(name), "scene_%06d.scene", i);
            toll::scene::write_scene((fs::path(cfg.out_dir) / name).string(),
                                     toll::scene::generate_scene(spec, scene_seed));
        }
    }
    std::cout << "wrote " << ds.samples.size() << " samples to " << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_pretrain(const ConfigArgs& cargs, const std::string& resume, bool gen) {
    auto cfg = cargs.build();
    const auto ds = obtain_dataset(cfg, gen);
    toll::train::TrainState state =
        resume.empty() ? toll::train::init_state(cfg) : toll::train::load_checkpoint(resume, cfg);
    const auto rows = toll::train::run_pretrain_to_dir(cfg, ds, state);
    std::cout << "trained to epoch " << state.epoch << " over " << ds.samples.size() << " samples; "
              << rows.size() << " metric rows -> " << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_eval(const ConfigArgs& cargs, const std::string& checkpoint) {
    auto cfg = cargs.build();
    const auto ds = obtain_dataset(cfg, false);
    const auto state = toll::train::load_checkpoint(checkpoint, cfg);
    const uint64_t eseed = toll::Rng(cfg.seed).fork(3, static_cast<uint64_t>(state.epoch)).next_u64();
    const auto ev = toll::train::evaluate(cfg, ds, state.student, eseed);

    fs::create_directories(cfg.out_dir);
    toll::train::MetricsRow row;
    row.epoch = state.epoch;
    row.loss_gen = state.last_loss_gen;
    row.loss_distill = state.last_loss_distill;
    row.lr = state.epoch > 0 && state.epoch <= cfg.epochs ? toll::cosine_lr(state.epoch - 1, cfg.opt) : 0.0;
    row.nmi_obj = ev.nmi_obj;
    row.ari_obj = ev.ari_obj;
    row.acc_obj = ev.acc_obj;
    row.nmi_edge = ev.nmi_edge;
    row.ari_edge = ev.ari_edge;
    row.acc_edge = ev.acc_edge;
    row.layout_centroid_err = toll::train::layout_probe(cfg, ds, state.student, cfg.recover_samples,
                                                        toll::Rng(cfg.seed).fork(4).next_u64());
    const auto csv_path = fs::path(cfg.out_dir) / "eval.csv";
    std::ofstream csv(csv_path);
    csv << toll::train::metrics_csv_header() << "\n" << toll::train::metrics_csv_row(row) << "\n";
    csv.close();

    auto as_labels = [](const std::vector<int>& v) {
        toll::Tensor t = toll::Tensor::zeros({static_cast<int64_t>(v.size()), 1});
        for (size_t i = 0; i < v.size(); ++i) t.data[i] = static_cast<double>(v[i]);
        return t;
    };
    toll::write_tensor_file((fs::path(cfg.out_dir) / "embeddings.toll").string(),
                            {{"emb.object", ev.emb_obj},
                             {"emb.object_labels", as_labels(ev.labels_obj)},
                             {"emb.edge", ev.emb_edge},
                             {"emb.edge_labels", as_labels(ev.labels_edge)}});
    std::cout << toll::train::metrics_csv_header() << "\n" << toll::train::metrics_csv_row(row) << "\n";
    return kExitOk;
}

int cmd_recover(const ConfigArgs& cargs, const std::string& checkpoint, const std::string& sample_path,
                const std::string& out_path, uint64_t seed) {
    auto cfg = cargs.build();
    const auto state = toll::train::load_checkpoint(checkpoint, cfg);
    const auto sample = toll::scene::read_sample(sample_path);
    const auto rec = toll::train::run_recover(cfg, sample, state.student, seed);

    toll::scene::LabeledPointCloud cloud;
    for (const auto& [id, pts] : rec.clouds) {
        for (const auto& p : pts) {
            cloud.points.push_back(p);
            cloud.instance_ids.push_back(id);
        }
    }
    toll::scene::write_scene(out_path, cloud);
    for (size_t i = 0; i < rec.err.node_ids.size(); ++i) {
        std::cout << "node " << rec.err.node_ids[i] << " centroid_err "
                  << toll::fmt_f64(rec.err.centroid_dist[i]) << " extent_log_err "
                  << toll::fmt_f64(rec.err.extent_log_err[i]) << "\n";
    }
    std::cout << "mean_centroid_err " << toll::fmt_f64(rec.err.mean_centroid_dist) << " mean_extent_log_err "
              << toll::fmt_f64(rec.err.mean_extent_log_err) << "\n";
    return kExitOk;
}

int cmd_starvation(const std::string& out_csv, double lambda_topo, int trials, uint64_t seed) {
    const std::vector<double> gains = {1.0, 10.0, 100.0, 1000.0};
    const auto multi =
        toll::starve::starvation_scaling(gains, lambda_topo, trials, toll::starve::Regime::kMulti, seed);
    const auto single =
        toll::starve::starvation_scaling(gains, lambda_topo, trials, toll::starve::Regime::kSingle, seed);

    std::ofstream csv(out_csv);
    if (!csv) throw toll::error("cannot write " + out_csv);
    csv << "lambda_prior,regime,cum_update,final_residual\n";
    for (size_t i = 0; i < gains.size(); ++i) {
        csv << toll::fmt_f64(gains[i]) << ",multi," << toll::fmt_f64(multi.cum_updates[i]) << ","
            << toll::fmt_f64(multi.final_residuals[i]) << "\n";
    }
    for (size_t i = 0; i < gains.size(); ++i) {
        csv << toll::fmt_f64(gains[i]) << ",single," << toll::fmt_f64(single.cum_updates[i]) << ","
            << toll::fmt_f64(single.final_residuals[i]) << "\n";
    }
    csv.close();
    std::cout << "multi-regime log-log slope: " << toll::fmt_f64(multi.slope) << "\n";
    const bool ok = multi.slope >= -1.15 && multi.slope <= -0.85;
    std::cout << (ok ? "slope within [-1.15, -0.85]" : "slope OUTSIDE [-1.15, -0.85]") << "\n";
    return ok ? kExitOk : kExitAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ToLL: topological layout learning lab"};
    app.require_subcommand(1);

    ConfigArgs gen_args, pre_args, eval_args, rec_args;
    bool write_scenes = false;
    std::string resume, checkpoint, sample_path, rec_out = "recovered.scene", starve_csv = "starvation.csv";
    bool gen_missing = false;
    uint64_t rec_seed = 0, starve_seed = 1;
    double lambda_topo = 0.1;
    int trials = 3;

    auto* gen = app.add_subcommand("gen-data", "Synthesize scenes and write subgraph samples");
    gen_args.attach(gen);
    gen->add_option("--scenes", [&gen_args](const CLI::results_t& r) { gen_args.overrides["data.scenes"] = r.at(0); return true; }, "Scene count")->type_name("N");
    gen->add_option("--objects", [&gen_args](const CLI::results_t& r) { gen_args.overrides["data.objects"] = r.at(0); return true; }, "Objects per scene")->type_name("N");
    gen->add_option("--tau-pts", [&gen_args](const CLI::results_t& r) { gen_args.overrides["data.tau_pts"] = r.at(0); return true; }, "Minimum points per instance")->type_name("N");
    gen->add_option("--k-min", [&gen_args](const CLI::results_t& r) { gen_args.overrides["data.k_min"] = r.at(0); return true; }, "Minimum subgraph size")->type_name("N");
    gen->add_option("--rho-min", [&gen_args](const CLI::results_t& r) { gen_args.overrides["data.rho_min"] = r.at(0); return true; }, "Edge-removal ratio lower bound")->type_name("X");
    gen->add_option("--rho-max", [&gen_args](const CLI::results_t& r) { gen_args.overrides["data.rho_max"] = r.at(0); return true; }, "Edge-removal ratio upper bound")->type_name("X");
    gen->add_option("--seed", [&gen_args](const CLI::results_t& r) { gen_args.overrides["run.seed"] = r.at(0); return true; }, "Run seed")->type_name("N");
    gen->add_option("--out-dir", [&gen_args](const CLI::results_t& r) { gen_args.overrides["run.out_dir"] = r.at(0); return true; }, "Output directory")->type_name("DIR");
    gen->add_flag("--write-scenes", write_scenes, "Also write raw scene files");

    auto* pre = app.add_subcommand("pretrain", "Run the pretraining loop");
    pre_args.attach(pre);
    pre->add_option("--resume", resume, "Checkpoint to resume from");
    pre->add_flag("--gen", gen_missing, "Generate the dataset when the data directory is missing");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint with clustering metrics");
    eval_args.attach(ev);
    ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

    auto* rec = app.add_subcommand("recover", "Reverse-sample a layout for one sample file");
    rec_args.attach(rec);
    rec->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    rec->add_option("--sample", sample_path, "Sample file")->required();
    rec->add_option("--out", rec_out, "Recovered scene file");
    rec->add_option("--seed", rec_seed, "Sampling seed");

    auto* sd = app.add_subcommand("starvation-demo", "Gradient-starvation sweep and slope fit");
    sd->add_option("--out", starve_csv, "Output CSV path");
    sd->add_option("--lambda-topo", lambda_topo, "Fixed topological gain");
    sd->add_option("--trials", trials, "Trials per gain");
    sd->add_option("--seed", starve_seed, "Sweep seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_args, write_scenes);
        if (pre->parsed()) return cmd_pretrain(pre_args, resume, gen_missing);
        if (ev->parsed()) return cmd_eval(eval_args, checkpoint);
        if (rec->parsed()) return cmd_recover(rec_args, checkpoint, sample_path, rec_out, rec_seed);
        if (sd->parsed()) return cmd_starvation(starve_csv, lambda_topo, trials, starve_seed);
    } catch (const toll::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const toll::numeric_error& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
