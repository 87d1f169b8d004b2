#include "toll/scene_io.hpp"

#include <fstream>
#include <sstream>

namespace toll::scene {

namespace {

// Line-oriented reader that keeps the current line number for error context.
class LineReader {
public:
    LineReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

    std::istringstream next(const std::string& field) {
        std::string line;
        if (!std::getline(in_, line)) {
            throw parse_error(path_ + ":" + std::to_string(lineno_ + 1) + ": unexpected end of file while reading " + field);
        }
        ++lineno_;
        return std::istringstream(line);
    }

    template <typename T>
    T token(std::istringstream& ls, const std::string& field) {
        T v{};
        if (!(ls >> v)) {
            throw parse_error(path_ + ":" + std::to_string(lineno_) + ": malformed " + field);
        }
        return v;
    }

    void expect_word(std::istringstream& ls, const std::string& word) {
        std::string w;
        ls >> w;
        if (w != word) {
            throw parse_error(path_ + ":" + std::to_string(lineno_) + ": expected '" + word + "', got '" + w + "'");
        }
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw parse_error(path_ + ":" + std::to_string(lineno_) + ": " + msg);
    }

private:
    std::istream& in_;
    std::string path_;
    int lineno_ = 0;
};

}  // namespace

void write_scene(const std::string& path, const LabeledPointCloud& cloud) {
    if (cloud.points.size() != cloud.instance_ids.size()) throw error("write_scene: length mismatch");
    std::ofstream f(path);
    if (!f) throw error("cannot open for writing: " + path);
    f << "toll-scene 1 " << cloud.points.size() << "\n";
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const auto& p = cloud.points[i];
        f << fmt_f64(p[0]) << " " << fmt_f64(p[1]) << " " << fmt_f64(p[2]) << " " << cloud.instance_ids[i]
          << "\n";
    }
    if (!f) throw error("write failed: " + path);
}

LabeledPointCloud read_scene(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw parse_error("cannot open: " + path);
    LineReader r(f, path);
    auto header = r.next("header");
    r.expect_word(header, "toll-scene");
    const int version = r.token<int>(header, "version");
    if (version != 1) r.fail("unsupported scene version " + std::to_string(version));
    const int64_t n = r.token<int64_t>(header, "point count");
    if (n < 0) r.fail("negative point count");
    LabeledPointCloud cloud;
    cloud.points.reserve(static_cast<size_t>(n));
    cloud.instance_ids.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        auto ls = r.next("point " + std::to_string(i));
        Vec3 p;
        p[0] = r.token<double>(ls, "x");
        p[1] = r.token<double>(ls, "y");
        p[2] = r.token<double>(ls, "z");
        const int id = r.token<int>(ls, "instance id");
        if (id < 0) r.fail("negative instance id");
        cloud.points.push_back(p);
        cloud.instance_ids.push_back(id);
    }
    return cloud;
}

void write_sample(const std::string& path, const SubgraphSample& sample) {
    std::ofstream f(path);
    if (!f) throw error("cannot open for writing: " + path);
    f << "toll-sample 1 " << sample.nodes.size() << " " << sample.edges.size() << "\n";
    for (const auto& n : sample.nodes) {
        f << "node " << n.id << "\n";
        f << "desc";
        for (double v : n.descriptor.serialize()) f << " " << fmt_f64(v);
        f << "\n";
        f << "pts " << n.points.size() << "\n";
        for (const auto& p : n.points) {
            f << fmt_f64(p[0]) << " " << fmt_f64(p[1]) << " " << fmt_f64(p[2]) << "\n";
        }
        f << "cat " << n.category << "\n";
    }
    for (const auto& e : sample.edges) {
        f << "edge " << e.src << " " << e.dst;
        for (double v : e.geom.serialize()) f << " " << fmt_f64(v);
        f << "\n";
    }
    f << "anchor " << sample.anchor << "\n";
    if (!f) throw error("write failed: " + path);
}

SubgraphSample read_sample(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw parse_error("cannot open: " + path);
    LineReader r(f, path);
    auto header = r.next("header");
    r.expect_word(header, "toll-sample");
    const int version = r.token<int>(header, "version");
    if (version != 1) r.fail("unsupported sample version " + std::to_string(version));
    const int num_nodes = r.token<int>(header, "node count");
    const int num_edges = r.token<int>(header, "edge count");
    if (num_nodes < 1 || num_edges < 0) r.fail("bad counts in header");

    SubgraphSample s;
    for (int i = 0; i < num_nodes; ++i) {
        SceneNode n;
        auto nl = r.next("node");
        r.expect_word(nl, "node");
        n.id = r.token<int>(nl, "node id");
        auto dl = r.next("desc");
        r.expect_word(dl, "desc");
        std::array<double, 11> desc;
        for (int k = 0; k < 11; ++k) desc[static_cast<size_t>(k)] = r.token<double>(dl, "descriptor value");
        n.descriptor = SpatialDescriptor::deserialize(desc);
        auto pl = r.next("pts");
        r.expect_word(pl, "pts");
        const int np = r.token<int>(pl, "point count");
        if (np < 1) r.fail("node must have at least one point");
        n.points.reserve(static_cast<size_t>(np));
        for (int p = 0; p < np; ++p) {
            auto ls = r.next("node point");
            Vec3 pt;
            pt[0] = r.token<double>(ls, "x");
            pt[1] = r.token<double>(ls, "y");
            pt[2] = r.token<double>(ls, "z");
            n.points.push_back(pt);
        }
        auto cl = r.next("cat");
        r.expect_word(cl, "cat");
        n.category = r.token<int>(cl, "category id");
        s.nodes.push_back(std::move(n));
    }
    for (int i = 0; i < num_edges; ++i) {
        auto el = r.next("edge");
        r.expect_word(el, "edge");
        Edge e;
        e.src = r.token<int>(el, "edge src");
        e.dst = r.token<int>(el, "edge dst");
        std::array<double, 11> g;
        for (int k = 0; k < 11; ++k) g[static_cast<size_t>(k)] = r.token<double>(el, "edge geometry value");
        e.geom = EdgeGeometry::deserialize(g);
        s.edges.push_back(e);
    }
    auto al = r.next("anchor");
    r.expect_word(al, "anchor");
    s.anchor = r.token<int>(al, "anchor id");
    s.validate();
    return s;
}

}  // namespace toll::scene
