#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "toll/scene_io.hpp"

using namespace toll;
using namespace toll::scene;

namespace {
SubgraphSample make_sample() {
    SceneSpec spec;
    spec.num_objects = 6;
    spec.points_per_object = 24;
    const auto cloud = generate_scene(spec, 77);
    SamplePipelineConfig pcfg;
    pcfg.tau_pts = 8;
    pcfg.k_min = 3;
    const auto samples = build_samples(cloud, pcfg, 78);
    REQUIRE(!samples.empty());
    return samples[0];
}
}  // namespace

TEST_CASE("sample round-trip is bit-exact") {
    const auto s = make_sample();
    const std::string path = "io_test_sample.toll";
    write_sample(path, s);
    const auto back = read_sample(path);
    REQUIRE(back.nodes.size() == s.nodes.size());
    REQUIRE(back.edges.size() == s.edges.size());
    CHECK(back.anchor == s.anchor);
    for (size_t i = 0; i < s.nodes.size(); ++i) {
        CHECK(back.nodes[i].id == s.nodes[i].id);
        CHECK(back.nodes[i].category == s.nodes[i].category);
        CHECK(back.nodes[i].points == s.nodes[i].points);
        CHECK(back.nodes[i].descriptor.serialize() == s.nodes[i].descriptor.serialize());
    }
    for (size_t i = 0; i < s.edges.size(); ++i) {
        CHECK(back.edges[i].src == s.edges[i].src);
        CHECK(back.edges[i].dst == s.edges[i].dst);
        CHECK(back.edges[i].geom.serialize() == s.edges[i].geom.serialize());
    }
    std::remove(path.c_str());
}

TEST_CASE("sample header declares node and edge counts") {
    const auto s = make_sample();
    const std::string path = "io_test_header.toll";
    write_sample(path, s);
    std::ifstream f(path);
    std::string magic;
    int version, nodes, edges;
    f >> magic >> version >> nodes >> edges;
    CHECK(magic == "toll-sample");
    CHECK(version == 1);
    CHECK(nodes == static_cast<int>(s.nodes.size()));
    CHECK(edges == static_cast<int>(s.edges.size()));
    std::remove(path.c_str());
}

TEST_CASE("truncated or malformed files raise parse errors with context") {
    const auto s = make_sample();
    const std::string path = "io_test_trunc.toll";
    write_sample(path, s);
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::trunc);
    out << content.substr(0, content.size() / 2);
    out.close();
    try {
        read_sample(path);
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        // error message carries file and line context
        CHECK(std::string(e.what()).find(path) != std::string::npos);
        CHECK(std::string(e.what()).find(':') != std::string::npos);
    }

    std::ofstream bad(path, std::ios::trunc);
    bad << "not-a-sample 1 2 3\n";
    bad.close();
    CHECK_THROWS_AS(read_sample(path), parse_error);
    CHECK_THROWS_AS(read_sample("does_not_exist.toll"), parse_error);
    std::remove(path.c_str());
}

TEST_CASE("scene file round-trip and header") {
    SceneSpec spec;
    spec.num_objects = 2;
    spec.points_per_object = 10;
    const auto cloud = generate_scene(spec, 5);
    const std::string path = "io_test_scene.scene";
    write_scene(path, cloud);
    const auto back = read_scene(path);
    CHECK(back.points == cloud.points);
    CHECK(back.instance_ids == cloud.instance_ids);

    std::ifstream f(path);
    std::string magic;
    int version;
    size_t count;
    f >> magic >> version >> count;
    CHECK(magic == "toll-scene");
    CHECK(version == 1);
    CHECK(count == cloud.points.size());
    std::remove(path.c_str());
}
