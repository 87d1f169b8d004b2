#include "toll/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace toll::scene {

std::array<double, 11> SpatialDescriptor::serialize() const {
    return {centroid[0], centroid[1], centroid[2], stddev[0], stddev[1], stddev[2],
            extent[0],   extent[1],   extent[2],   volume,    max_length};
}

SpatialDescriptor SpatialDescriptor::deserialize(const std::array<double, 11>& v) {
    SpatialDescriptor d;
    d.centroid = {v[0], v[1], v[2]};
    d.stddev = {v[3], v[4], v[5]};
    d.extent = {v[6], v[7], v[8]};
    d.volume = v[9];
    d.max_length = v[10];
    return d;
}

std::array<double, 11> EdgeGeometry::serialize() const {
    return {dpos[0],    dpos[1],    dpos[2],    dstd[0], dstd[1], dstd[2],
            dextent[0], dextent[1], dextent[2], dvol,    dlen};
}

EdgeGeometry EdgeGeometry::deserialize(const std::array<double, 11>& v) {
    EdgeGeometry g;
    g.dpos = {v[0], v[1], v[2]};
    g.dstd = {v[3], v[4], v[5]};
    g.dextent = {v[6], v[7], v[8]};
    g.dvol = v[9];
    g.dlen = v[10];
    return g;
}

EdgeGeometry EdgeGeometry::reversed() const {
    EdgeGeometry g;
    for (int a = 0; a < 3; ++a) {
        g.dpos[a] = -dpos[a];
        g.dstd[a] = -dstd[a];
        g.dextent[a] = -dextent[a];
    }
    g.dvol = -dvol;
    g.dlen = -dlen;
    return g;
}

int SubgraphSample::node_index(int id) const {
    for (size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].id == id) return static_cast<int>(i);
    }
    return -1;
}

void SubgraphSample::validate_structure() const {
    if (nodes.empty()) throw error("sample: no nodes");
    if (node_index(anchor) < 0) throw error("sample: anchor not among nodes");
    std::set<std::pair<int, int>> seen;
    for (const auto& e : edges) {
        if (e.src == e.dst) throw error("sample: self-loop");
        if (node_index(e.src) < 0 || node_index(e.dst) < 0) throw error("sample: dangling edge endpoint");
        if (!seen.insert({e.src, e.dst}).second) throw error("sample: duplicate directed edge");
    }
}

void SubgraphSample::validate() const {
    validate_structure();
    // BFS over the undirected skeleton.
    std::map<int, std::vector<int>> adj;
    for (const auto& e : edges) {
        adj[e.src].push_back(e.dst);
        adj[e.dst].push_back(e.src);
    }
    std::set<int> visited{nodes[0].id};
    std::queue<int> q;
    q.push(nodes[0].id);
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[u]) {
            if (visited.insert(v).second) q.push(v);
        }
    }
    if (visited.size() != nodes.size()) throw error("sample: undirected skeleton is disconnected");
}

namespace {

// Six aspect profiles over the three primitive surfaces; category id is the
// profile index so synthetic scenes carry semantic labels.
struct Profile {
    Primitive prim;
    Vec3 half;  // base half-extent, scaled by a size jitter
};

const Profile kProfiles[6] = {
    {Primitive::kBox, {0.30, 0.30, 0.30}},        // cubic box
    {Primitive::kBox, {0.55, 0.15, 0.15}},        // elongated box
    {Primitive::kEllipsoid, {0.30, 0.30, 0.30}},  // sphere
    {Primitive::kEllipsoid, {0.50, 0.18, 0.18}},  // elongated ellipsoid
    {Primitive::kPlane, {0.45, 0.45, 0.0}},       // horizontal patch
    {Primitive::kPlane, {0.0, 0.45, 0.45}},       // vertical patch
};

Vec3 sample_box_surface(const Vec3& half, Rng& rng) {
    // Pick a face weighted by area, then a uniform point on it.
    const double ax = half[1] * half[2];
    const double ay = half[0] * half[2];
    const double az = half[0] * half[1];
    const double total = 2.0 * (ax + ay + az);
    double u = rng.uniform() * total;
    Vec3 p{rng.uniform(-half[0], half[0]), rng.uniform(-half[1], half[1]), rng.uniform(-half[2], half[2])};
    for (int axis = 0; axis < 3; ++axis) {
        const double area = axis == 0 ? ax : (axis == 1 ? ay : az);
        for (double sign : {-1.0, 1.0}) {
            if (u < area) {
                p[axis] = sign * half[axis];
                return p;
            }
            u -= area;
        }
    }
    p[2] = half[2];
    return p;
}

Vec3 sample_ellipsoid_surface(const Vec3& half, Rng& rng) {
    double x, y, z, n2;
    do {
        x = rng.normal();
        y = rng.normal();
        z = rng.normal();
        n2 = x * x + y * y + z * z;
    } while (n2 < 1e-12);
    const double inv = 1.0 / std::sqrt(n2);
    return {half[0] * x * inv, half[1] * y * inv, half[2] * z * inv};
}

Vec3 sample_plane(const Vec3& half, Rng& rng) {
    Vec3 p{};
    for (int a = 0; a < 3; ++a) p[a] = half[a] > 0.0 ? rng.uniform(-half[a], half[a]) : 0.0;
    return p;
}

}  // namespace

LabeledPointCloud generate_scene(const SceneSpec& spec, uint64_t seed) {
    if (spec.num_objects < 1) throw error("generate_scene: num_objects must be >= 1");
    if (spec.points_per_object < 1) throw error("generate_scene: points_per_object must be >= 1");
    if (spec.noise_clusters < 0 || spec.points_per_noise_cluster < 1 || spec.workspace_extent <= 0.0 ||
        spec.num_categories < 1 || spec.num_categories > 6) {
        throw error("generate_scene: invalid spec");
    }
    Rng rng(seed);
    LabeledPointCloud cloud;
    const double ws = spec.workspace_extent * 0.5;
    int next_id = 0;
    for (int obj = 0; obj < spec.num_objects; ++obj) {
        const int cat = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(spec.num_categories)));
        const Profile& prof = kProfiles[cat];
        const double size = rng.uniform(0.7, 1.4);
        Vec3 half{prof.half[0] * size, prof.half[1] * size, prof.half[2] * size};
        Vec3 center{rng.uniform(-ws, ws), rng.uniform(-ws, ws), rng.uniform(-ws, ws)};
        const int id = next_id++;
        cloud.categories[id] = cat;
        for (int p = 0; p < spec.points_per_object; ++p) {
            Vec3 local{};
            switch (prof.prim) {
                case Primitive::kBox: local = sample_box_surface(half, rng); break;
                case Primitive::kEllipsoid: local = sample_ellipsoid_surface(half, rng); break;
                case Primitive::kPlane: local = sample_plane(half, rng); break;
            }
            cloud.points.push_back({center[0] + local[0], center[1] + local[1], center[2] + local[2]});
            cloud.instance_ids.push_back(id);
        }
    }
    // Isotropic noise clusters carry their own ids; category index past the
    // object profiles marks them.
    for (int c = 0; c < spec.noise_clusters; ++c) {
        Vec3 center{rng.uniform(-ws, ws), rng.uniform(-ws, ws), rng.uniform(-ws, ws)};
        const double sigma = rng.uniform(0.1, 0.4);
        const int id = next_id++;
        cloud.categories[id] = spec.num_categories;
        for (int p = 0; p < spec.points_per_noise_cluster; ++p) {
            cloud.points.push_back({center[0] + sigma * rng.normal(), center[1] + sigma * rng.normal(),
                                    center[2] + sigma * rng.normal()});
            cloud.instance_ids.push_back(id);
        }
    }
    return cloud;
}

SpatialDescriptor compute_descriptor(const std::vector<Vec3>& points) {
    if (points.empty()) throw error("compute_descriptor: empty point set");
    SpatialDescriptor d;
    Vec3 mn = points[0];
    Vec3 mx = points[0];
    for (const auto& p : points) {
        for (int a = 0; a < 3; ++a) {
            d.centroid[a] += p[a];
            mn[a] = std::min(mn[a], p[a]);
            mx[a] = std::max(mx[a], p[a]);
        }
    }
    const double inv = 1.0 / static_cast<double>(points.size());
    for (int a = 0; a < 3; ++a) d.centroid[a] *= inv;
    for (const auto& p : points) {
        for (int a = 0; a < 3; ++a) {
            const double diff = p[a] - d.centroid[a];
            d.stddev[a] += diff * diff;
        }
    }
    d.volume = 1.0;
    for (int a = 0; a < 3; ++a) {
        d.stddev[a] = std::sqrt(d.stddev[a] * inv);  // population form
        d.extent[a] = mx[a] - mn[a];
        d.volume *= d.extent[a];
        d.max_length = std::max(d.max_length, d.extent[a]);
    }
    return d;
}

std::vector<SceneNode> abstract_nodes(const LabeledPointCloud& cloud, int tau_pts,
                                      const std::set<int>& excluded_ids) {
    if (tau_pts < 1) throw error("abstract_nodes: tau_pts must be >= 1");
    if (cloud.points.size() != cloud.instance_ids.size()) {
        throw error("abstract_nodes: points/instance_ids length mismatch");
    }
    std::map<int, std::vector<Vec3>> by_id;
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        if (cloud.instance_ids[i] < 0) throw error("abstract_nodes: negative instance id");
        by_id[cloud.instance_ids[i]].push_back(cloud.points[i]);
    }
    std::vector<SceneNode> nodes;
    for (auto& [id, pts] : by_id) {
        if (static_cast<int>(pts.size()) < tau_pts) continue;
        if (excluded_ids.count(id)) continue;
        SceneNode n;
        n.id = id;
        auto cat = cloud.categories.find(id);
        n.category = cat == cloud.categories.end() ? 0 : cat->second;
        n.descriptor = compute_descriptor(pts);
        n.points = std::move(pts);
        nodes.push_back(std::move(n));
    }
    return nodes;
}

std::vector<std::vector<int>> partition_subgraphs(const std::vector<SceneNode>& nodes, int k_min) {
    if (k_min < 1) throw error("partition_subgraphs: k_min must be >= 1");
    if (nodes.empty()) throw error("partition_subgraphs: no nodes");

    struct Cluster {
        std::vector<int> members;  // node ids
        Vec3 mean{};
        bool alive = true;
    };
    std::vector<Cluster> clusters;
    for (const auto& n : nodes) {
        clusters.push_back({{n.id}, n.descriptor.centroid, true});
    }

    auto linkage = [](const Cluster& a, const Cluster& b) {
        const double na = static_cast<double>(a.members.size());
        const double nb = static_cast<double>(b.members.size());
        double d2 = 0.0;
        for (int t = 0; t < 3; ++t) {
            const double diff = a.mean[t] - b.mean[t];
            d2 += diff * diff;
        }
        return std::sqrt(na * nb / (na + nb)) * std::sqrt(d2);
    };
    auto all_big = [&](int min_size) {
        for (const auto& c : clusters) {
            if (c.alive && static_cast<int>(c.members.size()) < min_size) return false;
        }
        return true;
    };

    size_t alive = clusters.size();
    while (!all_big(k_min) && alive > 1) {
        double best = 0.0;
        int bi = -1, bj = -1;
        for (size_t i = 0; i < clusters.size(); ++i) {
            if (!clusters[i].alive) continue;
            for (size_t j = i + 1; j < clusters.size(); ++j) {
                if (!clusters[j].alive) continue;
                const double d = linkage(clusters[i], clusters[j]);
                if (bi < 0 || d < best) {
                    best = d;
                    bi = static_cast<int>(i);
                    bj = static_cast<int>(j);
                }
            }
        }
        auto& a = clusters[static_cast<size_t>(bi)];
        auto& b = clusters[static_cast<size_t>(bj)];
        const double na = static_cast<double>(a.members.size());
        const double nb = static_cast<double>(b.members.size());
        for (int t = 0; t < 3; ++t) a.mean[t] = (na * a.mean[t] + nb * b.mean[t]) / (na + nb);
        a.members.insert(a.members.end(), b.members.begin(), b.members.end());
        b.alive = false;
        --alive;
    }

    std::vector<std::vector<int>> out;
    for (auto& c : clusters) {
        if (!c.alive) continue;
        std::sort(c.members.begin(), c.members.end());
        out.push_back(std::move(c.members));
    }
    return out;
}

std::vector<std::pair<int, int>> generate_edges(const std::vector<int>& node_ids, double rho,
                                                uint64_t seed) {
    const int n = static_cast<int>(node_ids.size());
    if (n < 2) throw error("generate_edges: need at least 2 nodes");
    if (rho < 0.0 || rho > 1.0) throw error("generate_edges: rho outside [0,1]");
    Rng rng(seed);

    // Wilson's loop-erased random walk over the complete graph.
    std::vector<int> parent(static_cast<size_t>(n), -1);
    std::vector<char> in_tree(static_cast<size_t>(n), 0);
    const int root = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
    in_tree[static_cast<size_t>(root)] = 1;
    for (int start = 0; start < n; ++start) {
        if (in_tree[static_cast<size_t>(start)]) continue;
        int u = start;
        while (!in_tree[static_cast<size_t>(u)]) {
            int v = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - 1)));
            if (v >= u) ++v;  // uniform over the other nodes
            parent[static_cast<size_t>(u)] = v;
            u = v;
        }
        u = start;
        while (!in_tree[static_cast<size_t>(u)]) {
            in_tree[static_cast<size_t>(u)] = 1;
            u = parent[static_cast<size_t>(u)];
        }
    }

    std::set<std::pair<int, int>> chosen;
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u) {
        if (u == root || parent[static_cast<size_t>(u)] < 0) continue;
        int a = u, b = parent[static_cast<size_t>(u)];
        if (rng.uniform() < 0.5) std::swap(a, b);
        edges.emplace_back(a, b);
        chosen.insert({a, b});
    }

    const int64_t full = static_cast<int64_t>(n) * (n - 1);
    const int64_t target = static_cast<int64_t>((1.0 - rho) * static_cast<double>(full));
    int64_t remaining = std::max<int64_t>(0, target - static_cast<int64_t>(edges.size()));

    std::vector<std::pair<int, int>> pool;
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a != b && !chosen.count({a, b})) pool.emplace_back(a, b);
        }
    }
    // Partial Fisher-Yates for the remaining distinct directed edges.
    for (int64_t k = 0; k < remaining; ++k) {
        const size_t j = static_cast<size_t>(k) +
                         static_cast<size_t>(rng.uniform_int(static_cast<uint64_t>(pool.size() - static_cast<size_t>(k))));
        std::swap(pool[static_cast<size_t>(k)], pool[j]);
        edges.push_back(pool[static_cast<size_t>(k)]);
    }

    std::vector<std::pair<int, int>> out;
    out.reserve(edges.size());
    for (const auto& [a, b] : edges) {
        out.emplace_back(node_ids[static_cast<size_t>(a)], node_ids[static_cast<size_t>(b)]);
    }
    return out;
}

static double floored(double x) { return std::max(x, kScaleFloor); }

EdgeGeometry relative_geometry(const SpatialDescriptor& si, const SpatialDescriptor& sj) {
    EdgeGeometry g;
    for (int a = 0; a < 3; ++a) {
        g.dpos[a] = sj.centroid[a] - si.centroid[a];
        g.dstd[a] = std::log(floored(sj.stddev[a]) / floored(si.stddev[a]));
        g.dextent[a] = std::log(floored(sj.extent[a]) / floored(si.extent[a]));
    }
    g.dvol = std::log(floored(sj.volume) / floored(si.volume));
    g.dlen = std::log(floored(sj.max_length) / floored(si.max_length));
    return g;
}

SpatialDescriptor apply_geometry(const SpatialDescriptor& si, const EdgeGeometry& r) {
    SpatialDescriptor d;
    d.volume = floored(si.volume) * std::exp(r.dvol);
    d.max_length = floored(si.max_length) * std::exp(r.dlen);
    for (int a = 0; a < 3; ++a) {
        d.centroid[a] = si.centroid[a] + r.dpos[a];
        d.stddev[a] = floored(si.stddev[a]) * std::exp(r.dstd[a]);
        d.extent[a] = floored(si.extent[a]) * std::exp(r.dextent[a]);
    }
    return d;
}

int select_anchor(const SubgraphSample& sample, uint64_t seed) {
    if (sample.nodes.empty()) throw error("select_anchor: empty sample");
    Rng rng(seed);
    return sample.nodes[rng.uniform_int(sample.nodes.size())].id;
}

std::vector<SubgraphSample> build_samples(const LabeledPointCloud& cloud,
                                          const SamplePipelineConfig& cfg, uint64_t seed) {
    auto nodes = abstract_nodes(cloud, cfg.tau_pts, cfg.excluded_ids);
    if (nodes.empty()) return {};
    const auto parts = partition_subgraphs(nodes, cfg.k_min);
    Rng rng(seed);
    std::vector<SubgraphSample> out;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& ids = parts[pi];
        if (ids.size() < 2) continue;  // no edges possible
        SubgraphSample s;
        for (int id : ids) {
            for (const auto& n : nodes) {
                if (n.id == id) s.nodes.push_back(n);
            }
        }
        const double rho = rng.uniform(cfg.rho_min, cfg.rho_max);
        const uint64_t edge_seed = rng.next_u64();
        const uint64_t anchor_seed = rng.next_u64();
        for (const auto& [a, b] : generate_edges(ids, rho, edge_seed)) {
            Edge e;
            e.src = a;
            e.dst = b;
            const int ia = s.node_index(a);
            const int ib = s.node_index(b);
            e.geom = relative_geometry(s.nodes[static_cast<size_t>(ia)].descriptor,
                                       s.nodes[static_cast<size_t>(ib)].descriptor);
            s.edges.push_back(e);
        }
        s.anchor = select_anchor(s, anchor_seed);
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Vec3> merged_cloud(const SubgraphSample& sample) {
    std::vector<Vec3> pts;
    for (const auto& n : sample.nodes) pts.insert(pts.end(), n.points.begin(), n.points.end());
    return pts;
}

int relation_bin(const EdgeGeometry& g) {
    int axis = 0;
    double best = std::fabs(g.dpos[0]);
    for (int a = 1; a < 3; ++a) {
        if (std::fabs(g.dpos[a]) > best) {
            best = std::fabs(g.dpos[a]);
            axis = a;
        }
    }
    return 2 * axis + (g.dpos[axis] < 0.0 ? 1 : 0);
}

}  // namespace toll::scene
