#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <vector>

namespace hfl {

// Node address inside the hierarchy: (level, index within level).
// Level 0 is the cloud root, level L-1 holds the clients.
struct NodeId {
    int level = 0;
    int index = 0;
    auto operator<=>(const NodeId&) const = default;
};

struct TopologyConfig {
    int num_levels = 3;                  // L, must be in {2,3,4}
    std::vector<int> fanout_per_level;   // children per server at levels 0..L-2
    int num_overlap_clients = 0;
};

// Multi-parent hierarchical tree of servers and clients. Immutable after
// construction; safe to share read-only across threads.
class HflTree {
public:
    int num_levels() const { return num_levels_; }
    NodeId root() const { return {0, 0}; }
    int regional_level() const { return num_levels_ - 2; }
    int client_level() const { return num_levels_ - 1; }

    int level_size(int level) const;
    int client_count() const { return level_size(client_level()); }

    bool is_client(NodeId n) const { return n.level == client_level(); }
    bool is_server(NodeId n) const { return n.level >= 0 && n.level <= regional_level(); }
    bool contains(NodeId n) const;

    // Parents of a node, ordered by parent index. Clients in an overlapping
    // coverage area have two; everything else below the root has one.
    const std::vector<NodeId>& parents(NodeId n) const;

    // A(s): children whose parent list contains `server`. Rejects clients.
    const std::vector<NodeId>& coverage(NodeId server) const;

    std::vector<NodeId> nodes_at(int level) const;
    std::vector<NodeId> clients() const { return nodes_at(client_level()); }
    std::vector<NodeId> regional_servers() const { return nodes_at(regional_level()); }

    const std::vector<NodeId>& overlap_clients() const { return overlap_clients_; }
    bool is_overlap_client(NodeId n) const;

    friend HflTree build_tree(const TopologyConfig& config);
    friend HflTree place_overlap_clients(const HflTree& tree, int k, uint64_t rng_seed);

private:
    int num_levels_ = 0;
    std::vector<int> level_sizes_;
    // parents_[level][index] / children_[level][index], indexed by node address
    std::vector<std::vector<std::vector<NodeId>>> parents_;
    std::vector<std::vector<std::vector<NodeId>>> children_;
    std::vector<NodeId> overlap_clients_;  // sorted by index
};

// Builds the base tree: contiguous block assignment, client i's primary
// parent is regional server i / clients_per_regional.
HflTree build_tree(const TopologyConfig& config);

// Returns a copy of `tree` in which k seeded-chosen clients gain a second
// parent: the regional server adjacent (index + 1, wrapping) to their
// primary one.
HflTree place_overlap_clients(const HflTree& tree, int k, uint64_t rng_seed);

}  // namespace hfl
