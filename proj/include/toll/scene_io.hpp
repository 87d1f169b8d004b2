#pragma once

#include <string>

#include "toll/scene.hpp"

namespace toll::scene {

// Scene file: `toll-scene 1 <num_points>` then one `x y z id` line per point,
// floats with 17 significant digits.
void write_scene(const std::string& path, const LabeledPointCloud& cloud);
LabeledPointCloud read_scene(const std::string& path);

// Sample file: header `toll-sample 1 <num_nodes> <num_edges>`, then per node
// the fields id, descriptor, points, category in that order, then edges, then
// the anchor. read(write(x)) round-trips bit-exactly.
void write_sample(const std::string& path, const SubgraphSample& sample);
SubgraphSample read_sample(const std::string& path);

}  // namespace toll::scene
