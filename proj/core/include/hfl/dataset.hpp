#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hfl/topology.hpp"

namespace hfl {

struct Shape {
    int h = 0;
    int w = 0;
    int c = 0;
    int size() const { return h * w * c; }
    bool operator==(const Shape&) const = default;
};

// One labeled image, pixels in [0,1], channel-last layout (y*w + x)*c + ch.
struct Example {
    std::vector<double> pixels;
    int label = 0;
};

struct Dataset {
    std::vector<Example> examples;
    int num_classes = 0;
    Shape shape;

    size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }
};

struct ClientShard {
    NodeId client;
    Dataset data;
};

struct PartitionPlan {
    double alpha = 0.5;
    // assignments[client] = indices into the source dataset, disjoint across clients
    std::vector<std::vector<int>> assignments;
};

// Deterministic class-template images plus clipped Gaussian noise. Templates
// depend only on the class index, so noise=0 yields the templates exactly.
Dataset synth_dataset(int num_classes, int per_class, Shape shape, double noise,
                      uint64_t rng_seed);

// Pixel values of the template for class k (no noise).
std::vector<double> class_template(int k, int num_classes, Shape shape);

// IDX binary reader/writer (big-endian magic 0x00000803 images / 0x00000801
// labels, single channel). Pixels are scaled to [0,1] by /255 on load.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& data, const std::string& images_path,
               const std::string& labels_path);

// Per-class Dirichlet(alpha) split of the dataset across clients. Every
// client ends up with at least one example; empty shards are repaired by
// moving one example from the largest shard.
PartitionPlan dirichlet_partition(const Dataset& data, int num_clients, double alpha,
                                  uint64_t rng_seed);

Dataset subset(const Dataset& data, std::span<const int> indices);
Dataset concat(const Dataset& a, const Dataset& b);

}  // namespace hfl
