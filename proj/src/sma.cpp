#include "toll/sma.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "toll/kernels.hpp"
#include "toll/nn.hpp"

namespace toll::sma {

const char* level_name(Level l) {
    switch (l) {
        case Level::kObject: return "object";
        case Level::kEdge: return "edge";
        case Level::kTriplet: return "triplet";
    }
    return "?";
}

std::vector<ViewSpec> SmaConfig::default_views() {
    return {
        {"Sv1", ViewRole::kStudent, ViewSource::kOrigin, 0.8, 0.2},
        {"Sv2", ViewRole::kStudent, ViewSource::kAugmented, 0.8, 0.6},
        {"Sv3", ViewRole::kStudent, ViewSource::kOrigin, 0.8, 0.6},
        {"Tv6", ViewRole::kTeacher, ViewSource::kOrigin, 0.2, 0.2},
        {"Tv5", ViewRole::kTeacher, ViewSource::kAugmented, 0.1, 0.1},
    };
}

std::vector<std::pair<std::string, std::string>> SmaConfig::default_pairs() {
    return {{"Tv6", "Sv2"}, {"Tv5", "Sv3"}, {"Tv5", "Sv1"}, {"Tv6", "Sv3"}};
}

void SmaConfig::validate() const {
    for (const auto& v : views) {
        if (v.point_mask_ratio < 0.0 || v.point_mask_ratio > 1.0 || v.edge_mask_ratio < 0.0 ||
            v.edge_mask_ratio > 1.0) {
            throw config_error("sma: view mask ratios must be in [0,1]");
        }
    }
    for (const auto& [tid, sid] : pairs) {
        auto find = [&](const std::string& id, ViewRole role) {
            for (const auto& v : views) {
                if (v.id == id && v.role == role) return true;
            }
            return false;
        };
        if (!find(tid, ViewRole::kTeacher)) throw config_error("sma: pair references unknown teacher view " + tid);
        if (!find(sid, ViewRole::kStudent)) throw config_error("sma: pair references unknown student view " + sid);
    }
    if (queue_len < 1 || protos_obj < 1 || protos_edge < 1 || protos_trip < 1) {
        throw config_error("sma: queue length and prototype counts must be >= 1");
    }
    if (tau <= 0.0 || sinkhorn_eps <= 0.0 || sinkhorn_iters < 1) throw config_error("sma: bad sinkhorn settings");
    if (gen_point_mask < 0.0 || gen_point_mask > 1.0) throw config_error("sma: gen_point_mask in [0,1]");
    if (distill_mode != "swav" && distill_mode != "mse") throw config_error("sma: distill_mode must be swav or mse");
}

static Tensor unit_rows(int64_t rows, int64_t cols, Rng& rng) {
    Tensor t = Tensor::zeros({rows, cols});
    for (int64_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
            const double v = rng.normal();
            t.at(r, c) = v;
            sq += v * v;
        }
        const double inv = 1.0 / std::max(std::sqrt(sq), 1e-12);
        for (int64_t c = 0; c < cols; ++c) t.at(r, c) *= inv;
    }
    return t;
}

void make_params(ParamStore& store, int d, const SmaConfig& cfg, Rng& rng) {
    cfg.validate();
    store.create("proto.object", unit_rows(cfg.protos_obj, d, rng));
    store.create("proto.edge", unit_rows(cfg.protos_edge, d, rng));
    store.create("proto.triplet", unit_rows(cfg.protos_trip, 3 * d, rng));
    nn::make_mlp2(store, "pred.object", d, d, d, rng);
    nn::make_mlp2(store, "pred.edge", d, d, d, rng);
    nn::make_mlp2(store, "pred.triplet", 3 * d, d, 3 * d, rng);
}

void renormalize_prototypes(ParamStore& store) {
    for (const char* name : {"proto.object", "proto.edge", "proto.triplet"}) {
        Tensor& t = store.value(name);
        for (int64_t r = 0; r < t.rows(); ++r) {
            double sq = 0.0;
            for (int64_t c = 0; c < t.cols(); ++c) sq += t.at(r, c) * t.at(r, c);
            const double inv = 1.0 / std::max(std::sqrt(sq), 1e-12);
            for (int64_t c = 0; c < t.cols(); ++c) t.at(r, c) *= inv;
        }
    }
}

scene::SubgraphSample build_view(const scene::SubgraphSample& sample, const ViewSpec& spec, Rng& rng) {
    if (spec.point_mask_ratio < 0.0 || spec.point_mask_ratio > 1.0 || spec.edge_mask_ratio < 0.0 ||
        spec.edge_mask_ratio > 1.0) {
        throw error("build_view: mask ratios must be in [0,1]");
    }
    scene::SubgraphSample view;
    view.anchor = sample.anchor;

    // Scale jitter is applied about the merged-cloud centroid.
    double jitter_scale = 1.0;
    scene::Vec3 center{};
    if (spec.source == ViewSource::kAugmented) {
        jitter_scale = rng.uniform(0.9, 1.1);
        const auto merged = scene::merged_cloud(sample);
        for (const auto& p : merged) {
            for (int a = 0; a < 3; ++a) center[a] += p[a];
        }
        for (int a = 0; a < 3; ++a) center[a] /= static_cast<double>(merged.size());
    }

    for (const auto& node : sample.nodes) {
        scene::SceneNode n;
        n.id = node.id;
        n.category = node.category;
        std::vector<scene::Vec3> pts = node.points;
        if (spec.source == ViewSource::kAugmented) {
            // Resample with replacement, then scale about the subgraph
            // centroid, then smooth per-point jitter (the elastic-distortion
            // stand-in) scaled by the node's extent.
            std::vector<scene::Vec3> resampled(pts.size());
            for (auto& p : resampled) p = pts[rng.uniform_int(pts.size())];
            const double sigma = 0.005 * std::max(node.descriptor.max_length, scene::kScaleFloor);
            for (auto& p : resampled) {
                for (int a = 0; a < 3; ++a) {
                    p[a] = center[a] + jitter_scale * (p[a] - center[a]) + sigma * rng.normal();
                }
            }
            pts = std::move(resampled);
        }
        const int total = static_cast<int>(pts.size());
        int keep = total - static_cast<int>(std::floor(spec.point_mask_ratio * total));
        if (keep < 8) keep = std::min(total, 8);
        std::vector<int> perm = rng.permutation(total);
        perm.resize(static_cast<size_t>(keep));
        std::sort(perm.begin(), perm.end());  // keep original point order
        n.points.reserve(static_cast<size_t>(keep));
        for (int idx : perm) n.points.push_back(pts[static_cast<size_t>(idx)]);
        n.descriptor = scene::compute_descriptor(n.points);
        view.nodes.push_back(std::move(n));
    }

    const int m = static_cast<int>(sample.edges.size());
    const int keep_edges = m - static_cast<int>(std::floor(spec.edge_mask_ratio * m));
    std::vector<int> eperm = rng.permutation(m);
    eperm.resize(static_cast<size_t>(std::max(keep_edges, 0)));
    std::sort(eperm.begin(), eperm.end());
    for (int idx : eperm) {
        const auto& e = sample.edges[static_cast<size_t>(idx)];
        scene::Edge out;
        out.src = e.src;
        out.dst = e.dst;
        const int is = view.node_index(e.src);
        const int id = view.node_index(e.dst);
        out.geom = scene::relative_geometry(view.nodes[static_cast<size_t>(is)].descriptor,
                                            view.nodes[static_cast<size_t>(id)].descriptor);
        view.edges.push_back(out);
    }
    return view;
}

std::vector<scene::SubgraphSample> build_views(const scene::SubgraphSample& sample,
                                               const std::vector<ViewSpec>& table, uint64_t seed) {
    Rng base(seed);
    std::vector<scene::SubgraphSample> out;
    for (size_t i = 0; i < table.size(); ++i) {
        Rng view_rng = base.fork(i + 1);
        out.push_back(build_view(sample, table[i], view_rng));
    }
    return out;
}

void ema_update(const ParamStore& student, ParamStore& teacher, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw error("ema_update: alpha must be in [0,1]");
    for (auto& e : teacher.entries()) {
        if (!student.has(e.name)) throw error("ema_update: teacher entry missing in student: " + e.name);
        const Tensor& s = student.value(e.name);
        if (!s.same_shape(e.value)) throw shape_error("ema_update: shape mismatch for " + e.name);
        for (size_t i = 0; i < e.value.data.size(); ++i) {
            e.value.data[i] = alpha * e.value.data[i] + (1.0 - alpha) * s.data[i];
        }
    }
}

Tensor sinkhorn(const Tensor& scores, double eps, int iters, std::vector<double>* col_dev) {
    const int64_t n = scores.rows();
    const int64_t k = scores.cols();
    if (n < 1 || k < 1) throw error("sinkhorn: empty score matrix");
    if (eps <= 0.0 || iters < 1) throw error("sinkhorn: eps and iters must be positive");
    scores.check_finite("sinkhorn scores");
    if (col_dev) col_dev->clear();

    // Stabilized exponentiation: subtract the global max in log space, then
    // iterate the normalizations multiplicatively. Each normalization
    // rescales to unit sums, so no further overflow is possible.
    double mx = scores.data[0];
    for (double v : scores.data) mx = std::max(mx, v);
    Tensor q = scores;
    for (double& v : q.data) v = std::exp((v - mx) / eps);

    std::vector<double> sums(static_cast<size_t>(std::max(n, k)));
    for (int it = 0; it < iters; ++it) {
        std::fill(sums.begin(), sums.begin() + static_cast<long>(k), 0.0);
        for (int64_t r = 0; r < n; ++r) {
            const double* row = q.data.data() + r * k;
            for (int64_t c = 0; c < k; ++c) sums[static_cast<size_t>(c)] += row[c];
        }
        for (int64_t c = 0; c < k; ++c) sums[static_cast<size_t>(c)] = 1.0 / sums[static_cast<size_t>(c)];
        for (int64_t r = 0; r < n; ++r) {
            double* row = q.data.data() + r * k;
            for (int64_t c = 0; c < k; ++c) row[c] *= sums[static_cast<size_t>(c)];
        }
        for (int64_t r = 0; r < n; ++r) {
            double* row = q.data.data() + r * k;
            double s = 0.0;
            for (int64_t c = 0; c < k; ++c) s += row[c];
            const double inv = 1.0 / s;
            for (int64_t c = 0; c < k; ++c) row[c] *= inv;
        }
        if (col_dev) {
            const double uniform = static_cast<double>(n) / static_cast<double>(k);
            double dev = 0.0;
            for (int64_t c = 0; c < k; ++c) {
                double s = 0.0;
                for (int64_t r = 0; r < n; ++r) s += q.at(r, c);
                dev = std::max(dev, std::fabs(s - uniform));
            }
            col_dev->push_back(dev);
        }
    }

    // Make the row-sum contract exact: the last entry is rewritten as 1
    // minus the left-to-right sum of the others, so summing a row in index
    // order yields exactly 1.0.
    for (int64_t r = 0; r < n; ++r) {
        double partial = 0.0;
        for (int64_t c = 0; c < k - 1; ++c) partial += q.at(r, c);
        q.at(r, k - 1) = 1.0 - partial;
    }
    return q;
}

DistillBank::DistillBank(int64_t capacity, int64_t d_obj, int64_t d_edge, int64_t d_trip)
    : capacity_(capacity) {
    if (capacity < 1) throw error("DistillBank: capacity must be >= 1");
    obj_.dim = d_obj;
    edge_.dim = d_edge;
    trip_.dim = d_trip;
}

const DistillBank::Fifo& DistillBank::fifo(Level level) const {
    switch (level) {
        case Level::kObject: return obj_;
        case Level::kEdge: return edge_;
        case Level::kTriplet: return trip_;
    }
    throw error("DistillBank: bad level");
}

DistillBank::Fifo& DistillBank::fifo(Level level) {
    return const_cast<Fifo&>(static_cast<const DistillBank*>(this)->fifo(level));
}

void DistillBank::push(Level level, const Tensor& features) {
    Fifo& f = fifo(level);
    if (features.cols() != f.dim) {
        throw shape_error(std::string("DistillBank: width mismatch for level ") + level_name(level));
    }
    for (int64_t r = 0; r < features.rows(); ++r) {
        std::vector<double> row(features.data.begin() + r * f.dim, features.data.begin() + (r + 1) * f.dim);
        f.rows.push_back(std::move(row));
    }
    while (static_cast<int64_t>(f.rows.size()) > capacity_) f.rows.pop_front();
}

Tensor DistillBank::view(Level level) const {
    const Fifo& f = fifo(level);
    Tensor out = Tensor::zeros({static_cast<int64_t>(f.rows.size()), f.dim});
    for (size_t r = 0; r < f.rows.size(); ++r) {
        std::copy(f.rows[r].begin(), f.rows[r].end(), out.data.begin() + static_cast<int64_t>(r) * f.dim);
    }
    return out;
}

int64_t DistillBank::size(Level level) const { return static_cast<int64_t>(fifo(level).rows.size()); }
int64_t DistillBank::dim(Level level) const { return fifo(level).dim; }

bool DistillBank::full() const {
    return size(Level::kObject) >= capacity_ && size(Level::kEdge) >= capacity_ &&
           size(Level::kTriplet) >= capacity_;
}

void DistillBank::restore(Level level, const Tensor& rows) {
    Fifo& f = fifo(level);
    f.rows.clear();
    push(level, rows);
}

bool warmup_queues(DistillBank& bank, int num_samples,
                   const std::function<LevelFeatures(int)>& teacher_features) {
    if (num_samples < 1) {
        std::cerr << "[toll] warning: queue warm-up skipped, no samples available\n";
        return false;
    }
    int idx = 0;
    while (!bank.full()) {
        const LevelFeatures f = teacher_features(idx % num_samples);
        bank.push(Level::kObject, f.object);
        if (f.edge.rows() > 0) bank.push(Level::kEdge, f.edge);
        if (f.triplet.rows() > 0) bank.push(Level::kTriplet, f.triplet);
        ++idx;
        if (idx > num_samples * 10000) {
            std::cerr << "[toll] warning: queue warm-up could not fill queues\n";
            return false;
        }
    }
    return true;
}

namespace {

Tensor l2_normalize_rows_plain(const Tensor& t) {
    Tensor out = t;
    for (int64_t r = 0; r < t.rows(); ++r) {
        double sq = 0.0;
        for (int64_t c = 0; c < t.cols(); ++c) sq += t.at(r, c) * t.at(r, c);
        const double inv = 1.0 / std::max(std::sqrt(sq), 1e-12);
        for (int64_t c = 0; c < t.cols(); ++c) out.at(r, c) *= inv;
    }
    return out;
}

const char* proto_name(Level level) {
    switch (level) {
        case Level::kObject: return "proto.object";
        case Level::kEdge: return "proto.edge";
        case Level::kTriplet: return "proto.triplet";
    }
    return "?";
}

const char* pred_name(Level level) {
    switch (level) {
        case Level::kObject: return "pred.object";
        case Level::kEdge: return "pred.edge";
        case Level::kTriplet: return "pred.triplet";
    }
    return "?";
}

}  // namespace

const Tensor& QueueScores::at(Level level) const {
    switch (level) {
        case Level::kObject: return object;
        case Level::kEdge: return edge;
        case Level::kTriplet: return triplet;
    }
    throw error("QueueScores: bad level");
}

QueueScores queue_scores(const DistillBank& bank, const ParamStore& ps) {
    QueueScores out;
    for (Level level : {Level::kObject, Level::kEdge, Level::kTriplet}) {
        const Tensor queue = bank.view(level);
        Tensor scores = queue.rows() > 0
                            ? kernels::matmul(l2_normalize_rows_plain(queue), ps.value(proto_name(level)),
                                              false, true)
                            : Tensor::zeros({0, ps.value(proto_name(level)).rows()});
        switch (level) {
            case Level::kObject: out.object = std::move(scores); break;
            case Level::kEdge: out.edge = std::move(scores); break;
            case Level::kTriplet: out.triplet = std::move(scores); break;
        }
    }
    return out;
}

namespace {

// Teacher-side assignments: Sinkhorn over [Z_t; queue], first B rows kept.
Tensor swav_assignments(const Tensor& z_teacher, const DistillBank& bank, Level level,
                        const ParamStore& ps, const SmaConfig& cfg, const Tensor* cached_queue_scores) {
    const int64_t batch = z_teacher.rows();
    const Tensor batch_scores =
        kernels::matmul(l2_normalize_rows_plain(z_teacher), ps.value(proto_name(level)), false, true);
    Tensor qscores;
    if (cached_queue_scores == nullptr) {
        const Tensor queue = bank.view(level);
        qscores = queue.rows() > 0
                      ? kernels::matmul(l2_normalize_rows_plain(queue), ps.value(proto_name(level)),
                                        false, true)
                      : Tensor::zeros({0, batch_scores.cols()});
        cached_queue_scores = &qscores;
    }
    Tensor scores_t = Tensor::zeros({batch + cached_queue_scores->rows(), batch_scores.cols()});
    std::copy(batch_scores.data.begin(), batch_scores.data.end(), scores_t.data.begin());
    std::copy(cached_queue_scores->data.begin(), cached_queue_scores->data.end(),
              scores_t.data.begin() + batch_scores.size());
    const Tensor q_full = sinkhorn(scores_t, cfg.sinkhorn_eps, cfg.sinkhorn_iters);
    Tensor q = Tensor::zeros({batch, q_full.cols()});
    std::copy(q_full.data.begin(), q_full.data.begin() + q.size(), q.data.begin());
    return q;
}

// Student side: cross entropy of the prototype softmax against constant q.
Val swav_cross_entropy(Tape& t, Val z_student_pred, Tensor q, Level level, const ParamStore& ps,
                       const SmaConfig& cfg) {
    const double batch = static_cast<double>(q.rows());
    Val zn = t.l2_normalize_rows(z_student_pred);
    Val logits = t.scale(t.matmul_nt(zn, t.param(ps, proto_name(level))), 1.0 / cfg.tau);
    Val logp = t.log_softmax_rows(logits);
    Val ce = t.sum_all(t.mul(logp, t.constant(std::move(q))));
    return t.scale(ce, -1.0 / batch);
}

}  // namespace

Val swav_loss(Tape& t, Val z_student_pred, const Tensor& z_teacher, const DistillBank& bank,
              Level level, const ParamStore& ps, const SmaConfig& cfg,
              const Tensor* cached_queue_scores) {
    const int64_t batch = z_teacher.rows();
    if (batch < 1) throw error("swav_loss: empty batch");
    if (t.value(z_student_pred).rows() != batch) throw shape_error("swav_loss: student/teacher batch mismatch");
    if (z_teacher.cols() != bank.dim(level)) throw shape_error("swav_loss: level width mismatch");
    Tensor q = swav_assignments(z_teacher, bank, level, ps, cfg, cached_queue_scores);
    return swav_cross_entropy(t, z_student_pred, std::move(q), level, ps, cfg);
}

namespace {

// Matched edge rows between two views, by (src,dst) identity, in the
// teacher's edge order.
std::vector<std::pair<int, int>> matched_edges(const ViewFeatures& a, const ViewFeatures& b) {
    std::vector<std::pair<int, int>> out;
    std::map<std::pair<int, int>, int> pos_b;
    for (size_t i = 0; i < b.edge_ids.size(); ++i) pos_b[b.edge_ids[i]] = static_cast<int>(i);
    for (size_t i = 0; i < a.edge_ids.size(); ++i) {
        auto it = pos_b.find(a.edge_ids[i]);
        if (it != pos_b.end()) out.emplace_back(static_cast<int>(i), it->second);
    }
    return out;
}

Tensor gather_rows_plain(const Tensor& t, const std::vector<int>& idx) {
    Tensor out = Tensor::zeros({static_cast<int64_t>(idx.size()), t.cols()});
    for (size_t r = 0; r < idx.size(); ++r) {
        std::copy_n(t.data.begin() + static_cast<int64_t>(idx[r]) * t.cols(), t.cols(),
                    out.data.begin() + static_cast<int64_t>(r) * t.cols());
    }
    return out;
}

Tensor concat_cols_plain(const std::vector<Tensor>& parts) {
    int64_t cols = 0;
    for (const auto& p : parts) cols += p.cols();
    Tensor out = Tensor::zeros({parts[0].rows(), cols});
    int64_t off = 0;
    for (const auto& p : parts) {
        for (int64_t r = 0; r < p.rows(); ++r) {
            std::copy_n(p.data.begin() + r * p.cols(), p.cols(), out.data.begin() + r * cols + off);
        }
        off += p.cols();
    }
    return out;
}

}  // namespace

Val distill_loss(Tape& t, const std::map<std::string, ViewFeatures>& views, const DistillBank& bank,
                 const ParamStore& ps, const SmaConfig& cfg, const QueueScores* qs) {
    Val total = t.scalar(0.0);
    // Object-level assignments depend only on the teacher view, so pairs
    // sharing a teacher reuse them.
    std::map<std::string, Tensor> q_obj_cache;
    for (const auto& [teacher_id, student_id] : cfg.pairs) {
        const auto ti = views.find(teacher_id);
        const auto si = views.find(student_id);
        if (ti == views.end() || si == views.end()) throw error("distill_loss: pair references missing view");
        const ViewFeatures& tv = ti->second;
        const ViewFeatures& sv = si->second;
        if (!tv.is_teacher || sv.is_teacher) throw error("distill_loss: pair role mismatch");

        auto one_level = [&](Level level, Val z_stu, const Tensor& z_teach, const Tensor* q_cached) {
            Val pred = nn::mlp2(t, z_stu, ps, pred_name(level));
            if (cfg.distill_mode == "mse") {
                Val diff = t.sub(t.l2_normalize_rows(pred), t.constant(l2_normalize_rows_plain(z_teach)));
                total = t.add(total, t.mean_all(t.square(diff)));
                return;
            }
            const Tensor* queue_sc = qs != nullptr ? &qs->at(level) : nullptr;
            Tensor q = q_cached != nullptr
                           ? *q_cached
                           : swav_assignments(z_teach, bank, level, ps, cfg, queue_sc);
            total = t.add(total, swav_cross_entropy(t, pred, std::move(q), level, ps, cfg));
        };

        // Object level: node sets match across views.
        if (cfg.distill_mode != "mse" && !q_obj_cache.count(teacher_id)) {
            q_obj_cache[teacher_id] = swav_assignments(
                tv.ht, bank, Level::kObject, ps, cfg, qs != nullptr ? &qs->object : nullptr);
        }
        one_level(Level::kObject, sv.h, tv.ht,
                  cfg.distill_mode != "mse" ? &q_obj_cache[teacher_id] : nullptr);

        // Edge and triplet levels: only edges surviving in both views.
        const auto match = matched_edges(tv, sv);
        if (match.empty()) {
            std::cerr << "[toll] warning: no shared edges between views " << teacher_id << " and "
                      << student_id << "; edge/triplet terms skipped\n";
            continue;
        }
        std::vector<int> t_rows, s_rows, t_subj, t_obj, s_subj, s_obj;
        for (const auto& [tr, sr] : match) {
            t_rows.push_back(tr);
            s_rows.push_back(sr);
            t_subj.push_back(tv.node_span_of_edge[static_cast<size_t>(tr)].first);
            t_obj.push_back(tv.node_span_of_edge[static_cast<size_t>(tr)].second);
            s_subj.push_back(sv.node_span_of_edge[static_cast<size_t>(sr)].first);
            s_obj.push_back(sv.node_span_of_edge[static_cast<size_t>(sr)].second);
        }
        one_level(Level::kEdge, t.gather_rows(sv.e, s_rows), gather_rows_plain(tv.et, t_rows), nullptr);

        Val s_trip = t.concat_cols(
            {t.gather_rows(sv.h, s_subj), t.gather_rows(sv.h, s_obj), t.gather_rows(sv.e, s_rows)});
        Tensor t_trip = concat_cols_plain(
            {gather_rows_plain(tv.ht, t_subj), gather_rows_plain(tv.ht, t_obj), gather_rows_plain(tv.et, t_rows)});
        one_level(Level::kTriplet, s_trip, t_trip, nullptr);
    }
    return total;
}

Val total_loss(Tape& t, Val gen, Val distill, double lambda) {
    return t.add(gen, t.scale(distill, lambda));
}

}  // namespace toll::sma
