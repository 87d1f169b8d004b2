#pragma once

#include <cstdint>
#include <vector>

#include "toll/nn.hpp"
#include "toll/scene.hpp"
#include "toll/tape.hpp"

namespace toll::actgr {

struct ActgrConfig {
    int T = 2;           // recurrent steps
    int l_base = 2;      // inner GNN depth
    int d = 64;          // latent width
    int enc_width = 48;  // per-point trunk width of the object encoder

    void validate() const;
};

enum class AnchorVariant { kSingle, kMulti, kGlobal };

struct AnchorMode {
    AnchorVariant variant = AnchorVariant::kSingle;
    int k = 1;  // kMulti only
};

// (node index into sample.nodes, ground-truth descriptor) pairs.
using ConditionSet = std::vector<std::pair<int, scene::SpatialDescriptor>>;

struct Latent {
    Val H = -1;  // |V| x d
    Val E = -1;  // |E| x d
    int steps = 0;
};

// Creates every encoder / propagation parameter under the given store. The
// parameter set depends on l_base and widths but never on T (the recurrence
// shares weights).
void make_params(ParamStore& store, const ActgrConfig& cfg, Rng& rng);

// Zero-mean / max-length-normalized PointNet-style encoder; output is
// invariant to point order and rigid translation per node.
Val encode_objects(Tape& t, const std::vector<scene::SceneNode>& nodes, const ParamStore& ps,
                   const ActgrConfig& cfg);

// Edge features from [r_ij | h_i | h_j].
Val encode_edges(Tape& t, const scene::SubgraphSample& s, Val node_feats, const ParamStore& ps);

// Replaces the conditioned rows with MLP([h | s_gt]); all other rows are
// bit-identical to the input (pure row copies).
Val fuse_anchor(Tape& t, Val H, const ConditionSet& anchors, const ParamStore& ps);

// T recurrent iterations of l_base message-passing rounds fused by a GRU;
// edge features refresh once per iteration. T=0 returns the inputs.
// Disconnected input is rejected unless require_connected is cleared, which
// the distillation views need (edge masking does not preserve connectivity).
Latent propagate(Tape& t, Val H, Val E, const scene::SubgraphSample& s, const ActgrConfig& cfg,
                 const ParamStore& ps, bool require_connected = true);

// Eq. of the dynamic effective receptive field: reachable iff T*l_base >= K.
bool erf_reachable(int hop_distance, const ActgrConfig& cfg);

ConditionSet condition_set(const scene::SubgraphSample& s, const AnchorMode& mode, uint64_t seed);

// Convenience: encode, fuse, propagate in one call.
Latent forward(Tape& t, const scene::SubgraphSample& s, const ConditionSet& anchors,
               const ParamStore& ps, const ActgrConfig& cfg, bool require_connected = true);

}  // namespace toll::actgr
