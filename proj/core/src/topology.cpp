#include "hfl/topology.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hfl/rng.hpp"

namespace hfl {

int HflTree::level_size(int level) const {
    if (level < 0 || level >= num_levels_)
        throw std::out_of_range("level " + std::to_string(level) + " outside tree");
    return level_sizes_[level];
}

bool HflTree::contains(NodeId n) const {
    return n.level >= 0 && n.level < num_levels_ && n.index >= 0 &&
           n.index < level_sizes_[n.level];
}

const std::vector<NodeId>& HflTree::parents(NodeId n) const {
    if (!contains(n)) throw std::out_of_range("node not in tree");
    return parents_[n.level][n.index];
}

const std::vector<NodeId>& HflTree::coverage(NodeId server) const {
    if (!contains(server)) throw std::out_of_range("node not in tree");
    if (is_client(server))
        throw std::invalid_argument("coverage requested for a client node");
    return children_[server.level][server.index];
}

std::vector<NodeId> HflTree::nodes_at(int level) const {
    std::vector<NodeId> out;
    out.reserve(static_cast<size_t>(level_size(level)));
    for (int i = 0; i < level_sizes_[level]; ++i) out.push_back({level, i});
    return out;
}

bool HflTree::is_overlap_client(NodeId n) const {
    return std::binary_search(overlap_clients_.begin(), overlap_clients_.end(), n);
}

HflTree build_tree(const TopologyConfig& config) {
    const int levels = config.num_levels;
    if (levels < 2 || levels > 4)
        throw std::invalid_argument("num_levels must be in {2,3,4}, got " +
                                    std::to_string(levels));
    if (static_cast<int>(config.fanout_per_level.size()) != levels - 1)
        throw std::invalid_argument("fanout_per_level must have num_levels-1 entries");
    for (int f : config.fanout_per_level)
        if (f < 1) throw std::invalid_argument("fanouts must be >= 1");

    HflTree tree;
    tree.num_levels_ = levels;
    tree.level_sizes_.assign(static_cast<size_t>(levels), 1);
    for (int l = 1; l < levels; ++l)
        tree.level_sizes_[l] = tree.level_sizes_[l - 1] * config.fanout_per_level[l - 1];

    tree.parents_.resize(static_cast<size_t>(levels));
    tree.children_.resize(static_cast<size_t>(levels));
    for (int l = 0; l < levels; ++l) {
        tree.parents_[l].resize(static_cast<size_t>(tree.level_sizes_[l]));
        tree.children_[l].resize(static_cast<size_t>(tree.level_sizes_[l]));
    }
    for (int l = 1; l < levels; ++l) {
        const int fanout = config.fanout_per_level[l - 1];
        for (int i = 0; i < tree.level_sizes_[l]; ++i) {
            NodeId parent{l - 1, i / fanout};
            tree.parents_[l][i].push_back(parent);
            tree.children_[l - 1][parent.index].push_back({l, i});
        }
    }

    if (config.num_overlap_clients > 0)
        return place_overlap_clients(tree, config.num_overlap_clients, /*rng_seed=*/0);
    return tree;
}

HflTree place_overlap_clients(const HflTree& tree, int k, uint64_t rng_seed) {
    if (k == 0) return tree;
    if (k < 0) throw std::invalid_argument("overlap client count must be >= 0");
    const int clients = tree.client_count();
    if (k > clients)
        throw std::invalid_argument("overlap client count exceeds client count");
    const int regionals = tree.level_size(tree.regional_level());
    if (regionals < 2)
        throw std::invalid_argument("overlap requires at least two regional servers");

    // Seeded sample of k distinct client indices.
    std::vector<int> pool(static_cast<size_t>(clients));
    std::iota(pool.begin(), pool.end(), 0);
    auto eng = make_engine(derive_seed(rng_seed, {0x6f76657261ULL}));
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> dist(i, clients - 1);
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(dist(eng))]);
    }
    std::vector<int> chosen(pool.begin(), pool.begin() + k);
    std::sort(chosen.begin(), chosen.end());

    HflTree out = tree;
    const int client_level = tree.client_level();
    for (int idx : chosen) {
        NodeId client{client_level, idx};
        NodeId primary = out.parents_[client_level][idx].front();
        NodeId second{tree.regional_level(), (primary.index + 1) % regionals};
        auto& plist = out.parents_[client_level][idx];
        if (std::find(plist.begin(), plist.end(), second) == plist.end()) {
            plist.push_back(second);
            std::sort(plist.begin(), plist.end());
            out.children_[second.level][second.index].push_back(client);
            std::sort(out.children_[second.level][second.index].begin(),
                      out.children_[second.level][second.index].end());
        }
        out.overlap_clients_.push_back(client);
    }
    std::sort(out.overlap_clients_.begin(), out.overlap_clients_.end());
    out.overlap_clients_.erase(
        std::unique(out.overlap_clients_.begin(), out.overlap_clients_.end()),
        out.overlap_clients_.end());
    return out;
}

}  // namespace hfl
