#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "toll/common.hpp"
#include "toll/rng.hpp"

namespace toll::scene {

using Vec3 = std::array<double, 3>;

struct LabeledPointCloud {
    std::vector<Vec3> points;
    std::vector<int> instance_ids;
    // Synthetic semantic category per instance; not part of the scene file.
    std::map<int, int> categories;
};

// Absolute layout descriptor: [centroid, per-axis std, extent, volume,
// max length], 11 values in that serialization order.
struct SpatialDescriptor {
    Vec3 centroid{};
    Vec3 stddev{};
    Vec3 extent{};
    double volume = 0.0;
    double max_length = 0.0;

    std::array<double, 11> serialize() const;
    static SpatialDescriptor deserialize(const std::array<double, 11>& v);
};

struct SceneNode {
    int id = 0;
    int category = 0;
    std::vector<Vec3> points;
    SpatialDescriptor descriptor;
};

// Relative geometry r_ij: centroid difference plus log-ratios of the scale
// fields, so composing along paths is exact. Scale fields are floored at
// kScaleFloor before taking ratios.
struct EdgeGeometry {
    Vec3 dpos{};
    Vec3 dstd{};
    Vec3 dextent{};
    double dvol = 0.0;
    double dlen = 0.0;

    std::array<double, 11> serialize() const;
    static EdgeGeometry deserialize(const std::array<double, 11>& v);
    EdgeGeometry reversed() const;
};

constexpr double kScaleFloor = 1e-6;

struct Edge {
    int src = 0;
    int dst = 0;
    EdgeGeometry geom;
};

struct SubgraphSample {
    std::vector<SceneNode> nodes;
    std::vector<Edge> edges;
    int anchor = 0;

    int node_index(int id) const;  // -1 when absent
    // No self-loops, no duplicate directed edges, no dangling endpoints,
    // anchor present. Throws error otherwise.
    void validate_structure() const;
    // validate_structure plus a BFS-connected undirected skeleton.
    void validate() const;
};

enum class Primitive { kBox, kEllipsoid, kPlane };

struct SceneSpec {
    int num_objects = 8;
    int points_per_object = 256;
    int noise_clusters = 0;
    int points_per_noise_cluster = 64;
    double workspace_extent = 6.0;  // meters, cube side
    // Categories cycle through primitive x aspect profiles (6 of them).
    int num_categories = 6;
};

LabeledPointCloud generate_scene(const SceneSpec& spec, uint64_t seed);

SpatialDescriptor compute_descriptor(const std::vector<Vec3>& points);

std::vector<SceneNode> abstract_nodes(const LabeledPointCloud& cloud, int tau_pts,
                                      const std::set<int>& excluded_ids = {});

// Agglomerative merges under the size-weighted centroid linkage; stops at the
// first partition in the merge sequence with every cluster >= k_min, or one
// all-node cluster when no such partition exists.
std::vector<std::vector<int>> partition_subgraphs(const std::vector<SceneNode>& nodes, int k_min);

// Uniform random spanning tree (Wilson) with random edge orientation plus
// uniformly sampled extra directed edges:
// |E| = max(|V|-1, floor((1-rho)*|V|*(|V|-1))).
std::vector<std::pair<int, int>> generate_edges(const std::vector<int>& node_ids, double rho,
                                                uint64_t seed);

EdgeGeometry relative_geometry(const SpatialDescriptor& si, const SpatialDescriptor& sj);
SpatialDescriptor apply_geometry(const SpatialDescriptor& si, const EdgeGeometry& r);

int select_anchor(const SubgraphSample& sample, uint64_t seed);

// Full pipeline: scene -> nodes -> Ward partition -> per-part edge sampling
// with rho ~ U(rho_min, rho_max) -> anchor selection.
struct SamplePipelineConfig {
    int tau_pts = 512;
    int k_min = 3;
    double rho_min = 0.0;
    double rho_max = 0.5;
    std::set<int> excluded_ids;
};
std::vector<SubgraphSample> build_samples(const LabeledPointCloud& cloud,
                                          const SamplePipelineConfig& cfg, uint64_t seed);

// Merged cloud of all node points, in sample node/point order.
std::vector<Vec3> merged_cloud(const SubgraphSample& sample);

// Relation bin of an edge by dominant displacement axis and sign (6 bins).
int relation_bin(const EdgeGeometry& g);

}  // namespace toll::scene
