#include "toll/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "toll/scene_io.hpp"

namespace toll::train {

namespace fs = std::filesystem;

// RNG stream tags; every phase derives its randomness statelessly from the
// run seed so resume never shifts a sequence.
namespace stream {
constexpr uint64_t kTrain = 1;
constexpr uint64_t kWarmup = 2;
constexpr uint64_t kEval = 3;
constexpr uint64_t kRecover = 4;
constexpr uint64_t kShuffle = 5;
constexpr uint64_t kInit = 6;
constexpr uint64_t kSceneGen = 7;
constexpr uint64_t kSamplePrep = 8;
}  // namespace stream

std::string metrics_csv_header() {
    return "epoch,loss_gen,loss_distill,lr,nmi_obj,ari_obj,acc_obj,nmi_edge,ari_edge,acc_edge,"
           "layout_centroid_err";
}

std::string metrics_csv_row(const MetricsRow& r) {
    std::string s = std::to_string(r.epoch);
    for (double v : {r.loss_gen, r.loss_distill, r.lr, r.nmi_obj, r.ari_obj, r.acc_obj, r.nmi_edge,
                     r.ari_edge, r.acc_edge, r.layout_centroid_err}) {
        s += ",";
        s += fmt_f64(v);
    }
    return s;
}

Dataset generate_dataset(const RunConfig& cfg) {
    cfg.validate();
    Rng master(cfg.seed);
    scene::SceneSpec spec;
    spec.num_objects = cfg.objects;
    spec.points_per_object = cfg.points_per_object;
    spec.noise_clusters = cfg.noise_clusters;
    spec.workspace_extent = cfg.workspace;
    spec.num_categories = cfg.categories;
    scene::SamplePipelineConfig pcfg;
    pcfg.tau_pts = cfg.tau_pts;
    pcfg.k_min = cfg.k_min;
    pcfg.rho_min = cfg.rho_min;
    pcfg.rho_max = cfg.rho_max;

    Dataset ds;
    for (int i = 0; i < cfg.scenes; ++i) {
        const uint64_t scene_seed = master.fork(stream::kSceneGen, static_cast<uint64_t>(i)).next_u64();
        const auto cloud = scene::generate_scene(spec, scene_seed);
        const uint64_t prep_seed = master.fork(stream::kSamplePrep, static_cast<uint64_t>(i)).next_u64();
        for (auto& s : scene::build_samples(cloud, pcfg, prep_seed)) {
            ds.samples.push_back(std::move(s));
            if (cfg.max_samples > 0 && static_cast<int>(ds.samples.size()) >= cfg.max_samples) return ds;
        }
    }
    return ds;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%06zu.toll", i);
        scene::write_sample((fs::path(dir) / name).string(), ds.samples[i]);
    }
}

Dataset load_dataset(const std::string& dir) {
    if (!fs::is_directory(dir)) throw error("dataset directory not found: " + dir);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".toll") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    Dataset ds;
    for (const auto& f : files) ds.samples.push_back(scene::read_sample(f));
    if (ds.samples.empty()) throw error("no .toll samples in " + dir);
    return ds;
}

TrainState::TrainState(const RunConfig& cfg)
    : bank(cfg.sma.queue_len, cfg.actgr.d, cfg.actgr.d, 3 * cfg.actgr.d) {}

TrainState init_state(const RunConfig& cfg) {
    cfg.validate();
    TrainState state(cfg);
    Rng init_rng = Rng(cfg.seed).fork(stream::kInit);
    actgr::make_params(state.student, cfg.actgr, init_rng);
    diffusion::make_params(state.student, cfg.actgr.d, cfg.diff, init_rng);
    sma::make_params(state.student, cfg.actgr.d, cfg.sma, init_rng);
    state.teacher = state.student.clone_without({"pred."});
    return state;
}

namespace {

struct ViewForward {
    actgr::Latent latent;
    std::vector<std::pair<int, int>> edge_ids;
    std::vector<std::pair<int, int>> node_span;
};

ViewForward forward_view(Tape& t, const scene::SubgraphSample& view, const actgr::ConditionSet& conds,
                         const ParamStore& ps, const actgr::ActgrConfig& cfg,
                         bool require_connected = true) {
    ViewForward out;
    out.latent = actgr::forward(t, view, conds, ps, cfg, require_connected);
    for (const auto& e : view.edges) {
        out.edge_ids.emplace_back(e.src, e.dst);
        out.node_span.emplace_back(view.node_index(e.src), view.node_index(e.dst));
    }
    return out;
}

sma::ViewFeatures student_features(const ViewForward& f) {
    sma::ViewFeatures v;
    v.is_teacher = false;
    v.h = f.latent.H;
    v.e = f.latent.E;
    v.edge_ids = f.edge_ids;
    v.node_span_of_edge = f.node_span;
    return v;
}

sma::ViewFeatures teacher_features(Tape& t, const ViewForward& f) {
    sma::ViewFeatures v;
    v.is_teacher = true;
    v.ht = t.value(f.latent.H);
    v.et = t.value(f.latent.E);
    v.edge_ids = f.edge_ids;
    v.node_span_of_edge = f.node_span;
    return v;
}

// Object/edge/triplet rows of one teacher view, for queue pushes.
void append_level_features(sma::LevelFeatures& acc, const Tape& t, const ViewForward& f) {
    const Tensor h = t.value(f.latent.H);
    const Tensor e = t.value(f.latent.E);
    auto append_rows = [](Tensor& dst, const Tensor& src) {
        if (dst.size() == 0) {
            dst = src;
            return;
        }
        Tensor merged = Tensor::zeros({dst.rows() + src.rows(), dst.cols()});
        std::copy(dst.data.begin(), dst.data.end(), merged.data.begin());
        std::copy(src.data.begin(), src.data.end(), merged.data.begin() + dst.size());
        dst = std::move(merged);
    };
    append_rows(acc.object, h);
    if (e.rows() > 0) {
        append_rows(acc.edge, e);
        Tensor trip = Tensor::zeros({e.rows(), 3 * h.cols()});
        for (int64_t r = 0; r < e.rows(); ++r) {
            const auto [si, di] = f.node_span[static_cast<size_t>(r)];
            std::copy_n(h.data.begin() + si * h.cols(), h.cols(), trip.data.begin() + r * trip.cols());
            std::copy_n(h.data.begin() + di * h.cols(), h.cols(),
                        trip.data.begin() + r * trip.cols() + h.cols());
            std::copy_n(e.data.begin() + r * e.cols(), e.cols(),
                        trip.data.begin() + r * trip.cols() + 2 * h.cols());
        }
        append_rows(acc.triplet, trip);
    }
}

// Inference pass of all teacher views of one sample; returns the features
// per view id plus the stacked per-level rows for queue pushes.
struct TeacherPass {
    std::map<std::string, sma::ViewFeatures> features;
    sma::LevelFeatures push;
};

TeacherPass teacher_pass(const RunConfig& cfg, const std::vector<scene::SubgraphSample>& views,
                         const ParamStore& teacher) {
    TeacherPass out;
    Tape t(true);
    for (size_t i = 0; i < cfg.sma.views.size(); ++i) {
        if (cfg.sma.views[i].role != sma::ViewRole::kTeacher) continue;
        const auto f = forward_view(t, views[i], {}, teacher, cfg.actgr, false);
        out.features[cfg.sma.views[i].id] = teacher_features(t, f);
        append_level_features(out.push, t, f);
    }
    return out;
}

struct SampleStep {
    double gen_value = 0.0;
    double distill_value = 0.0;
    GradMap grads;
    sma::LevelFeatures push;
};

SampleStep train_sample(const RunConfig& cfg, const scene::SubgraphSample& sample,
                        const ParamStore& student, const ParamStore& teacher,
                        const sma::DistillBank& bank, const sma::QueueScores& qscores,
                        const diffusion::DiffusionSchedule& schedule, const Rng& sample_rng) {
    SampleStep out;
    Tape tape(false);

    // Generation path: the edge-guided view keeps the full edge topology and
    // masks node points; anchors per the configured mode.
    Rng gen_view_rng = sample_rng.fork(1);
    const sma::ViewSpec gen_spec{"gen", sma::ViewRole::kStudent, sma::ViewSource::kOrigin,
                                 cfg.sma.gen_point_mask, 0.0};
    const auto gen_view = sma::build_view(sample, gen_spec, gen_view_rng);
    const auto conds = actgr::condition_set(gen_view, cfg.anchor_mode, sample_rng.fork(2).next_u64());
    const auto gen_fwd = forward_view(tape, gen_view, conds, student, cfg.actgr);
    const Val gen = diffusion::gen_loss(tape, gen_view, gen_fwd.latent.H, schedule, cfg.nafl, cfg.diff,
                                        student, sample_rng.fork(3).next_u64());
    out.gen_value = tape.scalar_value(gen);

    // Distillation path: student views on the gradient tape, teacher views
    // on an inference tape, no anchor conditioning.
    const auto views = sma::build_views(sample, cfg.sma.views, sample_rng.fork(4).next_u64());
    TeacherPass teacher_out = teacher_pass(cfg, views, teacher);
    std::map<std::string, sma::ViewFeatures> view_map = std::move(teacher_out.features);
    out.push = std::move(teacher_out.push);
    for (size_t i = 0; i < cfg.sma.views.size(); ++i) {
        if (cfg.sma.views[i].role != sma::ViewRole::kStudent) continue;
        const auto f = forward_view(tape, views[i], {}, student, cfg.actgr, false);
        view_map[cfg.sma.views[i].id] = student_features(f);
    }
    const Val distill = sma::distill_loss(tape, view_map, bank, student, cfg.sma, &qscores);
    out.distill_value = tape.scalar_value(distill);

    // With lambda = 0 the distillation term is reported but stays off the
    // gradient path entirely.
    const Val total = cfg.sma.lambda > 0.0 ? sma::total_loss(tape, gen, distill, cfg.sma.lambda) : gen;
    out.grads = tape.backward(total);
    return out;
}

sma::LevelFeatures warmup_features(const RunConfig& cfg, const scene::SubgraphSample& sample,
                                   const ParamStore& teacher, const Rng& master, int sample_idx) {
    const uint64_t seed = master.fork(stream::kWarmup, static_cast<uint64_t>(sample_idx)).next_u64();
    const auto views = sma::build_views(sample, cfg.sma.views, seed);
    return teacher_pass(cfg, views, teacher).push;
}

}  // namespace

EvalOutput evaluate(const RunConfig& cfg, const Dataset& ds, const ParamStore& params,
                    uint64_t kmeans_seed) {
    const int d = cfg.actgr.d;
    std::vector<double> obj_rows, edge_rows;
    EvalOutput out;
    for (const auto& s : ds.samples) {
        Tape t(true);
        // Features come from the pipeline's own conditioning: the stored
        // single anchor. An anchor-free pass would probe every model off its
        // training distribution.
        const auto conds = actgr::condition_set(s, {actgr::AnchorVariant::kSingle, 1}, 0);
        const auto lat = actgr::forward(t, s, conds, params, cfg.actgr);
        // Embeddings are L2-normalized: the latent space is cosine-shaped
        // (prototype scoring normalizes the same way).
        const Tensor& h = t.value(t.l2_normalize_rows(lat.H));
        obj_rows.insert(obj_rows.end(), h.data.begin(), h.data.end());
        for (const auto& n : s.nodes) out.labels_obj.push_back(n.category);
        const Tensor& e = t.value(t.l2_normalize_rows(lat.E));
        edge_rows.insert(edge_rows.end(), e.data.begin(), e.data.end());
        for (const auto& edge : s.edges) out.labels_edge.push_back(scene::relation_bin(edge.geom));
    }
    out.emb_obj = Tensor({static_cast<int64_t>(out.labels_obj.size()), d}, std::move(obj_rows));
    out.emb_edge = Tensor({static_cast<int64_t>(out.labels_edge.size()), d}, std::move(edge_rows));

    auto run_level = [&](const Tensor& emb, const std::vector<int>& labels, uint64_t seed,
                         std::vector<int>& assign_out, double& nmi_v, double& ari_v, double& acc_v) {
        const int k = static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
        assign_out = metrics::kmeans(emb, k, seed, cfg.eval_kmeans_iters);
        nmi_v = metrics::nmi(labels, assign_out);
        ari_v = metrics::ari(labels, assign_out);
        acc_v = metrics::cluster_acc(labels, assign_out);
    };
    run_level(out.emb_obj, out.labels_obj, kmeans_seed, out.assign_obj, out.nmi_obj, out.ari_obj,
              out.acc_obj);
    if (!out.labels_edge.empty()) {
        run_level(out.emb_edge, out.labels_edge, kmeans_seed + 1, out.assign_edge, out.nmi_edge,
                  out.ari_edge, out.acc_edge);
    }
    return out;
}

RecoverOutput run_recover(const RunConfig& cfg, const scene::SubgraphSample& sample,
                          const ParamStore& params, uint64_t seed, std::optional<int> points_per_node) {
    const auto schedule = diffusion::build_schedule(cfg.diff.steps, cfg.diff.kind);
    Tape t(true);
    const auto conds = actgr::condition_set(sample, {actgr::AnchorVariant::kSingle, 1}, seed);
    const auto lat = actgr::forward(t, sample, conds, params, cfg.actgr);
    std::vector<int> counts;
    for (const auto& n : sample.nodes) {
        counts.push_back(points_per_node ? std::min<int>(*points_per_node, static_cast<int>(n.points.size()))
                                         : static_cast<int>(n.points.size()));
    }
    const auto clouds =
        diffusion::reverse_sample(counts, t.value(lat.H), schedule, cfg.diff, params, seed);
    RecoverOutput out;
    for (size_t i = 0; i < sample.nodes.size(); ++i) {
        out.clouds.emplace_back(sample.nodes[i].id, clouds[i]);
    }
    out.err = metrics::layout_error(out.clouds, sample);
    return out;
}

double layout_probe(const RunConfig& cfg, const Dataset& ds, const ParamStore& params, int count,
                    uint64_t seed) {
    const int n = std::min<int>(count, static_cast<int>(ds.samples.size()));
    if (n < 1) return 0.0;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto rec = run_recover(cfg, ds.samples[static_cast<size_t>(i)], params,
                                     seed + static_cast<uint64_t>(i), 32);
        acc += rec.err.mean_centroid_dist;
    }
    return acc / n;
}

std::vector<MetricsRow> run_pretrain(const RunConfig& cfg, const Dataset& ds, TrainState& state) {
    cfg.validate();
    if (ds.samples.empty()) throw error("run_pretrain: empty dataset");
    const auto schedule = diffusion::build_schedule(cfg.diff.steps, cfg.diff.kind);
    const Rng master(cfg.seed);
    const int n = static_cast<int>(ds.samples.size());

    if (state.epoch == 0 && !state.bank.full()) {
        sma::warmup_queues(state.bank, n, [&](int idx) {
            return warmup_features(cfg, ds.samples[static_cast<size_t>(idx)], state.teacher, master, idx);
        });
    }

    std::vector<MetricsRow> rows;
    for (int epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.opt);
        const auto order = master.fork(stream::kShuffle, static_cast<uint64_t>(epoch)).permutation(n);
        double epoch_gen = 0.0;
        double epoch_distill = 0.0;

        for (int start = 0; start < n; start += cfg.batch) {
            const int count = std::min(cfg.batch, n - start);
            // Queue rows and prototypes are fixed within a batch, so their
            // prototype scores are computed once here.
            const sma::QueueScores qscores = sma::queue_scores(state.bank, state.student);
            std::vector<SampleStep> steps(static_cast<size_t>(count));
            std::vector<int> numeric_failed(static_cast<size_t>(count), -1);
            std::vector<std::string> other_failed(static_cast<size_t>(count));
            // Samples in a batch are independent; every step sees the same
            // bank snapshot and results merge in batch order below.
            // Exceptions may not cross the parallel region, so they are
            // captured per slot and rethrown after the join.
#pragma omp parallel for schedule(dynamic, 1)
            for (int b = 0; b < count; ++b) {
                const int idx = order[static_cast<size_t>(start + b)];
                try {
                    const Rng srng =
                        master.fork(stream::kTrain, static_cast<uint64_t>(epoch), static_cast<uint64_t>(idx));
                    steps[static_cast<size_t>(b)] = train_sample(cfg, ds.samples[static_cast<size_t>(idx)],
                                                                 state.student, state.teacher, state.bank,
                                                                 qscores, schedule, srng);
                } catch (const numeric_error&) {
                    numeric_failed[static_cast<size_t>(b)] = idx;
                } catch (const std::exception& e) {
                    other_failed[static_cast<size_t>(b)] = std::string("sample ") + std::to_string(idx) +
                                                           ": " + e.what();
                }
            }
            for (int b = 0; b < count; ++b) {
                if (numeric_failed[static_cast<size_t>(b)] >= 0) {
                    throw numeric_error("numerical abort at sample " +
                                        std::to_string(numeric_failed[static_cast<size_t>(b)]) +
                                        " in epoch " + std::to_string(epoch + 1));
                }
                if (!other_failed[static_cast<size_t>(b)].empty()) {
                    throw error(other_failed[static_cast<size_t>(b)]);
                }
            }

            GradMap grads;
            for (int b = 0; b < count; ++b) {
                epoch_gen += steps[static_cast<size_t>(b)].gen_value;
                epoch_distill += steps[static_cast<size_t>(b)].distill_value;
                for (auto& [name, g] : steps[static_cast<size_t>(b)].grads) {
                    auto it = grads.find(name);
                    if (it == grads.end()) {
                        grads.emplace(name, std::move(g));
                    } else {
                        for (size_t i = 0; i < g.data.size(); ++i) it->second.data[i] += g.data[i];
                    }
                }
            }
            const double inv = 1.0 / static_cast<double>(count);
            for (auto& [name, g] : grads) {
                for (double& v : g.data) v *= inv;
            }
            if (cfg.opt.clip_norm > 0.0) clip_global_norm(grads, cfg.opt.clip_norm);
            adamw_step(state.student, grads, cfg.opt, lr);
            sma::renormalize_prototypes(state.student);
            sma::ema_update(state.student, state.teacher, cfg.sma.ema_alpha);
            for (int b = 0; b < count; ++b) {
                const auto& push = steps[static_cast<size_t>(b)].push;
                state.bank.push(sma::Level::kObject, push.object);
                if (push.edge.rows() > 0) state.bank.push(sma::Level::kEdge, push.edge);
                if (push.triplet.rows() > 0) state.bank.push(sma::Level::kTriplet, push.triplet);
            }
        }

        state.last_loss_gen = epoch_gen / n;
        state.last_loss_distill = epoch_distill / n;
        state.epoch = epoch + 1;

        if (state.epoch % cfg.eval_every == 0) {
            const uint64_t eseed = master.fork(stream::kEval, static_cast<uint64_t>(state.epoch)).next_u64();
            const EvalOutput ev = evaluate(cfg, ds, state.student, eseed);
            MetricsRow row;
            row.epoch = state.epoch;
            row.loss_gen = state.last_loss_gen;
            row.loss_distill = state.last_loss_distill;
            row.lr = lr;
            row.nmi_obj = ev.nmi_obj;
            row.ari_obj = ev.ari_obj;
            row.acc_obj = ev.acc_obj;
            row.nmi_edge = ev.nmi_edge;
            row.ari_edge = ev.ari_edge;
            row.acc_edge = ev.acc_edge;
            row.layout_centroid_err = layout_probe(
                cfg, ds, state.student, cfg.recover_samples,
                master.fork(stream::kRecover, static_cast<uint64_t>(state.epoch)).next_u64());
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<MetricsRow> run_pretrain_to_dir(const RunConfig& cfg, const Dataset& ds, TrainState& state,
                                            bool append_csv) {
    const auto rows = run_pretrain(cfg, ds, state);
    fs::create_directories(cfg.out_dir);
    const auto csv_path = fs::path(cfg.out_dir) / "metrics.csv";
    std::ofstream csv(csv_path, append_csv ? std::ios::app : std::ios::trunc);
    if (!csv) throw error("cannot write " + csv_path.string());
    if (!append_csv) csv << metrics_csv_header() << "\n";
    for (const auto& r : rows) csv << metrics_csv_row(r) << "\n";
    csv.close();
    save_checkpoint((fs::path(cfg.out_dir) / "checkpoint.toll").string(), state);
    return rows;
}

void save_checkpoint(const std::string& path, const TrainState& state) {
    std::vector<std::pair<std::string, Tensor>> tensors;
    Tensor meta = Tensor::zeros({1, 5});
    meta.data = {1.0, static_cast<double>(state.epoch), state.last_loss_gen, state.last_loss_distill, 0.0};
    tensors.emplace_back("meta", std::move(meta));
    for (const auto& e : state.student.entries()) {
        tensors.emplace_back("s." + e.name, e.value);
        tensors.emplace_back("sm." + e.name, e.m);
        tensors.emplace_back("sv." + e.name, e.v);
        tensors.emplace_back("st." + e.name, Tensor::scalar(static_cast<double>(e.step)));
    }
    for (const auto& e : state.teacher.entries()) tensors.emplace_back("t." + e.name, e.value);
    tensors.emplace_back("q.object", state.bank.serialize(sma::Level::kObject));
    tensors.emplace_back("q.edge", state.bank.serialize(sma::Level::kEdge));
    tensors.emplace_back("q.triplet", state.bank.serialize(sma::Level::kTriplet));
    write_tensor_file(path, tensors);
}

TrainState load_checkpoint(const std::string& path, const RunConfig& cfg) {
    TrainState state = init_state(cfg);
    std::map<std::string, Tensor> by_name;
    for (auto& [name, t] : read_tensor_file(path)) by_name.emplace(name, std::move(t));
    auto fetch = [&](const std::string& name) -> const Tensor& {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw parse_error("checkpoint missing tensor: " + name);
        return it->second;
    };
    const Tensor& meta = fetch("meta");
    if (meta.size() != 5 || meta.data[0] != 1.0) throw parse_error("checkpoint: bad meta record");
    state.epoch = static_cast<int>(meta.data[1]);
    state.last_loss_gen = meta.data[2];
    state.last_loss_distill = meta.data[3];
    for (auto& e : state.student.entries()) {
        const Tensor& v = fetch("s." + e.name);
        if (!v.same_shape(e.value)) throw parse_error("checkpoint shape mismatch for " + e.name);
        e.value = v;
        e.m = fetch("sm." + e.name);
        e.v = fetch("sv." + e.name);
        e.step = static_cast<int64_t>(fetch("st." + e.name).data[0]);
    }
    for (auto& e : state.teacher.entries()) {
        const Tensor& v = fetch("t." + e.name);
        if (!v.same_shape(e.value)) throw parse_error("checkpoint shape mismatch for teacher " + e.name);
        e.value = v;
    }
    state.bank.restore(sma::Level::kObject, fetch("q.object"));
    state.bank.restore(sma::Level::kEdge, fetch("q.edge"));
    state.bank.restore(sma::Level::kTriplet, fetch("q.triplet"));
    return state;
}

}  // namespace toll::train
