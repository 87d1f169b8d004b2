#include "toll/actgr.hpp"

#include <algorithm>
#include <cmath>

namespace toll::actgr {

void ActgrConfig::validate() const {
    if (T < 0) throw config_error("actgr: T must be >= 0");
    if (l_base < 1) throw config_error("actgr: l_base must be >= 1");
    if (d < 1 || enc_width < 1) throw config_error("actgr: widths must be >= 1");
}

void make_params(ParamStore& store, const ActgrConfig& cfg, Rng& rng) {
    cfg.validate();
    const int64_t d = cfg.d;
    const int64_t p = cfg.enc_width;
    nn::make_linear(store, "enc.pt1", 3, p, rng);
    nn::make_linear(store, "enc.pt2", p, p, rng);
    nn::make_mlp2(store, "enc.head", p, d, d, rng);
    nn::make_mlp2(store, "rel", 11 + 2 * d, d, d, rng);
    nn::make_mlp2(store, "fuse", d + 11, d, d, rng);
    for (int l = 0; l < cfg.l_base; ++l) {
        const std::string pre = "gnn" + std::to_string(l);
        nn::make_mlp2(store, pre + ".msg", 2 * d + 11, d, d, rng);
        nn::make_mlp2(store, pre + ".mrg", 2 * d, d, d, rng);
    }
    nn::make_gru(store, "gru", d, d, rng);
    nn::make_mlp2(store, "eup", 3 * d, d, d, rng);
}

Val encode_objects(Tape& t, const std::vector<scene::SceneNode>& nodes, const ParamStore& ps,
                   const ActgrConfig& cfg) {
    (void)cfg;
    if (nodes.empty()) throw error("encode_objects: no nodes");
    int64_t total = 0;
    std::vector<int> seg_lens;
    for (const auto& n : nodes) {
        if (n.points.empty()) throw error("encode_objects: node with empty point set");
        seg_lens.push_back(static_cast<int>(n.points.size()));
        total += static_cast<int64_t>(n.points.size());
    }
    Tensor pts = Tensor::zeros({total, 3});
    int64_t row = 0;
    for (const auto& n : nodes) {
        // Canonical frame: center at the centroid of the points being
        // encoded, scale by their max extent (floored).
        scene::Vec3 mean{};
        scene::Vec3 mn = n.points[0];
        scene::Vec3 mx = n.points[0];
        for (const auto& pt : n.points) {
            for (int a = 0; a < 3; ++a) {
                mean[a] += pt[a];
                mn[a] = std::min(mn[a], pt[a]);
                mx[a] = std::max(mx[a], pt[a]);
            }
        }
        double max_len = 0.0;
        for (int a = 0; a < 3; ++a) {
            mean[a] /= static_cast<double>(n.points.size());
            max_len = std::max(max_len, mx[a] - mn[a]);
        }
        max_len = std::max(max_len, scene::kScaleFloor);
        for (const auto& pt : n.points) {
            for (int a = 0; a < 3; ++a) pts.at(row, a) = (pt[a] - mean[a]) / max_len;
            ++row;
        }
    }
    Val x = t.constant(std::move(pts));
    x = t.relu(nn::linear(t, x, ps, "enc.pt1"));
    x = t.relu(nn::linear(t, x, ps, "enc.pt2"));
    Val pooled = t.segment_max_rows(x, seg_lens);
    return nn::mlp2(t, pooled, ps, "enc.head");
}

Val encode_edges(Tape& t, const scene::SubgraphSample& s, Val node_feats, const ParamStore& ps) {
    if (s.edges.empty()) {
        return t.constant(Tensor::zeros({0, t.value(node_feats).cols()}));
    }
    const int64_t m = static_cast<int64_t>(s.edges.size());
    Tensor rel = Tensor::zeros({m, 11});
    std::vector<int> src_idx, dst_idx;
    for (int64_t k = 0; k < m; ++k) {
        const auto& e = s.edges[static_cast<size_t>(k)];
        const int is = s.node_index(e.src);
        const int id = s.node_index(e.dst);
        if (is < 0 || id < 0) throw error("encode_edges: dangling endpoint");
        const auto r = e.geom.serialize();
        for (int j = 0; j < 11; ++j) rel.at(k, j) = r[static_cast<size_t>(j)];
        src_idx.push_back(is);
        dst_idx.push_back(id);
    }
    Val x = t.concat_cols({t.constant(std::move(rel)), t.gather_rows(node_feats, src_idx),
                           t.gather_rows(node_feats, dst_idx)});
    return nn::mlp2(t, x, ps, "rel");
}

Val fuse_anchor(Tape& t, Val H, const ConditionSet& anchors, const ParamStore& ps) {
    if (anchors.empty()) return H;
    const int64_t n_rows = t.value(H).rows();
    std::vector<int> anchor_idx;
    Tensor sgt = Tensor::zeros({static_cast<int64_t>(anchors.size()), 11});
    for (size_t k = 0; k < anchors.size(); ++k) {
        const auto& [idx, desc] = anchors[k];
        if (idx < 0 || idx >= n_rows) throw error("fuse_anchor: anchor index out of range");
        anchor_idx.push_back(idx);
        const auto v = desc.serialize();
        for (int j = 0; j < 11; ++j) sgt.at(static_cast<int64_t>(k), j) = v[static_cast<size_t>(j)];
    }
    Val fused = nn::mlp2(t, t.concat_cols({t.gather_rows(H, anchor_idx), t.constant(std::move(sgt))}),
                         ps, "fuse");
    // Row-select from [H; fused] so untouched rows stay bit-identical.
    std::vector<int> perm(static_cast<size_t>(n_rows));
    for (int64_t i = 0; i < n_rows; ++i) perm[static_cast<size_t>(i)] = static_cast<int>(i);
    for (size_t k = 0; k < anchor_idx.size(); ++k) {
        perm[static_cast<size_t>(anchor_idx[k])] = static_cast<int>(n_rows + static_cast<int64_t>(k));
    }
    return t.gather_rows(t.concat_rows({H, fused}), perm);
}

Latent propagate(Tape& t, Val H, Val E, const scene::SubgraphSample& s, const ActgrConfig& cfg,
                 const ParamStore& ps, bool require_connected) {
    cfg.validate();
    if (require_connected) {
        s.validate();  // rejects disconnected samples
    } else {
        s.validate_structure();
    }
    const int64_t n = static_cast<int64_t>(s.nodes.size());
    const int64_t m = static_cast<int64_t>(s.edges.size());
    if (t.value(H).rows() != n || t.value(E).rows() != m) throw shape_error("propagate: latent shape mismatch");
    if (cfg.T == 0) return {H, E, 0};

    // Directed messages run along and against every edge; the reverse
    // direction negates the relative geometry.
    std::vector<int> msg_src, msg_dst, e_idx, src_idx, dst_idx;
    Tensor rel = Tensor::zeros({2 * m, 11});
    for (int64_t k = 0; k < m; ++k) {
        const auto& e = s.edges[static_cast<size_t>(k)];
        const int is = s.node_index(e.src);
        const int id = s.node_index(e.dst);
        src_idx.push_back(is);
        dst_idx.push_back(id);
        const auto fwd = e.geom.serialize();
        const auto bwd = e.geom.reversed().serialize();
        for (int j = 0; j < 11; ++j) {
            rel.at(k, j) = fwd[static_cast<size_t>(j)];
            rel.at(m + k, j) = bwd[static_cast<size_t>(j)];
        }
    }
    for (int64_t k = 0; k < m; ++k) {
        msg_src.push_back(src_idx[static_cast<size_t>(k)]);
        msg_dst.push_back(dst_idx[static_cast<size_t>(k)]);
        e_idx.push_back(static_cast<int>(k));
    }
    for (int64_t k = 0; k < m; ++k) {
        msg_src.push_back(dst_idx[static_cast<size_t>(k)]);
        msg_dst.push_back(src_idx[static_cast<size_t>(k)]);
        e_idx.push_back(static_cast<int>(k));
    }
    const Val rel_c = t.constant(std::move(rel));

    Val h = H;
    Val e_feat = E;
    for (int step = 0; step < cfg.T; ++step) {
        Val g = h;
        for (int l = 0; l < cfg.l_base; ++l) {
            const std::string pre = "gnn" + std::to_string(l);
            Val msg_in = t.concat_cols({t.gather_rows(g, msg_src), t.gather_rows(e_feat, e_idx), rel_c});
            Val msgs = nn::mlp2(t, msg_in, ps, pre + ".msg");
            Val ctx = t.scatter_add_rows(msgs, msg_dst, n);
            g = nn::mlp2(t, t.concat_cols({g, ctx}), ps, pre + ".mrg");
        }
        h = nn::gru_cell(t, h, g, ps, "gru");
        e_feat = nn::mlp2(
            t, t.concat_cols({e_feat, t.gather_rows(h, src_idx), t.gather_rows(h, dst_idx)}), ps, "eup");
    }
    return {h, e_feat, cfg.T};
}

bool erf_reachable(int hop_distance, const ActgrConfig& cfg) {
    if (hop_distance < 0) throw error("erf_reachable: negative hop distance");
    return cfg.T * cfg.l_base >= hop_distance;
}

ConditionSet condition_set(const scene::SubgraphSample& s, const AnchorMode& mode, uint64_t seed) {
    if (s.nodes.empty()) throw error("condition_set: empty sample");
    ConditionSet out;
    switch (mode.variant) {
        case AnchorVariant::kSingle: {
            const int idx = s.node_index(s.anchor);
            if (idx < 0) throw error("condition_set: stored anchor missing");
            out.emplace_back(idx, s.nodes[static_cast<size_t>(idx)].descriptor);
            break;
        }
        case AnchorVariant::kMulti: {
            const int n = static_cast<int>(s.nodes.size());
            if (mode.k < 1 || mode.k > n) throw error("condition_set: multi k out of range");
            Rng rng(seed);
            std::vector<int> perm = rng.permutation(n);
            perm.resize(static_cast<size_t>(mode.k));
            std::sort(perm.begin(), perm.end());
            for (int idx : perm) out.emplace_back(idx, s.nodes[static_cast<size_t>(idx)].descriptor);
            break;
        }
        case AnchorVariant::kGlobal: {
            for (size_t i = 0; i < s.nodes.size(); ++i) {
                out.emplace_back(static_cast<int>(i), s.nodes[i].descriptor);
            }
            break;
        }
    }
    return out;
}

Latent forward(Tape& t, const scene::SubgraphSample& s, const ConditionSet& anchors,
               const ParamStore& ps, const ActgrConfig& cfg, bool require_connected) {
    Val h0 = encode_objects(t, s.nodes, ps, cfg);
    Val e0 = encode_edges(t, s, h0, ps);
    Val h = fuse_anchor(t, h0, anchors, ps);
    return propagate(t, h, e0, s, cfg, ps, require_connected);
}

}  // namespace toll::actgr
