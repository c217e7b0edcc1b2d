#include "hfl/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>

#include "hfl/parallel.hpp"
#include "hfl/rng.hpp"

namespace hfl {

ParamVector weighted_average(const std::vector<std::pair<const ParamVector*, double>>& updates) {
    if (updates.empty()) throw std::invalid_argument("weighted_average: no updates");
    const size_t len = updates.front().first->size();
    double total = 0;
    for (const auto& [params, weight] : updates) {
        if (params->size() != len)
            throw std::invalid_argument("weighted_average: parameter length mismatch");
        if (!(weight > 0)) throw std::invalid_argument("weighted_average: weights must be > 0");
        total += weight;
    }
    ParamVector out(len, 0.0);
    for (const auto& [params, weight] : updates) {
        const double scale = weight / total;
        for (size_t i = 0; i < len; ++i) out[i] += scale * (*params)[i];
    }
    return out;
}

ParamVector weighted_average(const std::vector<std::pair<ParamVector, double>>& updates) {
    std::vector<std::pair<const ParamVector*, double>> views;
    views.reserve(updates.size());
    for (const auto& [params, weight] : updates) views.push_back({&params, weight});
    return weighted_average(views);
}

std::vector<NodeId> select_clients(const std::vector<NodeId>& cov, const SelectionPolicy& policy,
                                   NodeId server, uint64_t round_counter) {
    if (cov.empty()) throw std::invalid_argument("select_clients: empty coverage");
    if (!(policy.participation > 0) || policy.participation > 1)
        throw std::invalid_argument("select_clients: participation must be in (0,1]");
    const size_t want = static_cast<size_t>(
        std::ceil(policy.participation * static_cast<double>(cov.size())));
    if (want >= cov.size()) return cov;

    uint64_t seed = derive_seed(policy.seed, {0x73656c656374ULL, static_cast<uint64_t>(server.level),
                                              static_cast<uint64_t>(server.index)});
    if (policy.mode == SelectionMode::resample_per_round)
        seed = derive_seed(seed, {round_counter});

    std::vector<NodeId> pool = cov;
    auto eng = make_engine(seed);
    for (size_t i = 0; i < want; ++i) {
        std::uniform_int_distribution<size_t> dist(i, pool.size() - 1);
        std::swap(pool[i], pool[dist(eng)]);
    }
    std::vector<NodeId> out(pool.begin(), pool.begin() + static_cast<ptrdiff_t>(want));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::vector<double>> subtree_sample_counts(const HflTree& tree,
                                                       const std::vector<Dataset>& shards) {
    if (static_cast<int>(shards.size()) != tree.client_count())
        throw std::invalid_argument("subtree_sample_counts: one shard per client required");
    std::vector<std::vector<double>> counts(static_cast<size_t>(tree.num_levels()));
    const int client_level = tree.client_level();
    counts[static_cast<size_t>(client_level)].resize(static_cast<size_t>(tree.client_count()));
    for (int i = 0; i < tree.client_count(); ++i) {
        const double n = static_cast<double>(shards[static_cast<size_t>(i)].size());
        if (n <= 0) throw std::invalid_argument("subtree_sample_counts: empty client shard");
        counts[static_cast<size_t>(client_level)][static_cast<size_t>(i)] = n;
    }
    for (int level = client_level - 1; level >= 0; --level) {
        counts[static_cast<size_t>(level)].assign(static_cast<size_t>(tree.level_size(level)), 0.0);
        for (int i = 0; i < tree.level_size(level); ++i) {
            double sum = 0;
            for (NodeId child : tree.coverage({level, i}))
                sum += counts[static_cast<size_t>(child.level)][static_cast<size_t>(child.index)];
            if (sum <= 0)
                throw std::invalid_argument("subtree_sample_counts: server subtree has no samples");
            counts[static_cast<size_t>(level)][static_cast<size_t>(i)] = sum;
        }
    }
    return counts;
}

uint64_t param_digest(const ParamVector& params) {
    // FNV-1a over the raw bytes
    uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : params) {
        uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

namespace {

struct AggregateEngine {
    const FederationPlan& plan;
    std::vector<std::vector<double>> weights;  // subtree sample counts
    std::mutex trace_mutex;

    explicit AggregateEngine(const FederationPlan& p)
        : plan(p), weights(subtree_sample_counts(*p.tree, *p.shards)) {}

    void record(RoundTrace tr) {
        if (!plan.trace) return;
        std::lock_guard<std::mutex> lock(trace_mutex);
        plan.trace->push_back(std::move(tr));
    }

    double node_weight(NodeId n) const {
        return weights[static_cast<size_t>(n.level)][static_cast<size_t>(n.index)];
    }

    ParamVector regional_round(NodeId server, const ParamVector& w_t, int global_round,
                               int local_round, uint64_t round_seed) {
        const auto& cov = plan.tree->coverage(server);
        const std::vector<NodeId> selected =
            select_clients(cov, plan.selection, server, round_seed);

        std::vector<ParamVector> results(selected.size());
        parallel_for(static_cast<int>(selected.size()), plan.workers, [&](int i) {
            const NodeId client = selected[static_cast<size_t>(i)];
            const uint64_t client_seed =
                derive_seed(round_seed, {0x636c69ULL, static_cast<uint64_t>(client.index)});
            HookCtx ctx{client, server, global_round, local_round, client_seed};
            const Dataset& shard = (*plan.shards)[static_cast<size_t>(client.index)];
            ParamVector updated;
            if (plan.hooks.pre_local_training) {
                const Dataset poisoned = plan.hooks.pre_local_training(ctx, shard);
                updated = client_update(*plan.net, w_t, poisoned, plan.hyper, client_seed,
                                        plan.batch_hook);
            } else {
                updated = client_update(*plan.net, w_t, shard, plan.hyper, client_seed,
                                        plan.batch_hook);
            }
            if (plan.hooks.post_local_training) plan.hooks.post_local_training(ctx, updated);
            results[static_cast<size_t>(i)] = std::move(updated);
        });

        std::vector<std::pair<const ParamVector*, double>> contribs;
        contribs.reserve(selected.size());
        for (size_t i = 0; i < selected.size(); ++i)
            contribs.push_back({&results[i], node_weight(selected[i])});
        ParamVector next = weighted_average(contribs);

        if (plan.hooks.post_server_aggregate) {
            HookCtx ctx{server, server, global_round, local_round,
                        derive_seed(round_seed, {0x737276ULL})};
            plan.hooks.post_server_aggregate(ctx, next);
        }
        return next;
    }

    ParamVector run(NodeId server, ParamVector w, int global_round, uint64_t path_seed) {
        const int level = server.level;
        if (!plan.tree->is_server(server))
            throw std::invalid_argument("aggregate: node is not a server");
        const int rounds = plan.schedule.rounds_per_level.at(static_cast<size_t>(level));
        const bool regional = level == plan.tree->regional_level();

        for (int t = 1; t <= rounds; ++t) {
            const auto started = std::chrono::steady_clock::now();
            const uint64_t round_seed =
                derive_seed(path_seed, {static_cast<uint64_t>(level),
                                        static_cast<uint64_t>(server.index),
                                        static_cast<uint64_t>(t)});
            RoundTrace tr;
            tr.level = level;
            tr.server = server;
            tr.round = t;

            if (regional) {
                tr.participants = select_clients(plan.tree->coverage(server), plan.selection,
                                                 server, round_seed);
                w = regional_round(server, w, global_round, t, round_seed);
            } else {
                const auto& children = plan.tree->coverage(server);
                tr.participants = children;
                std::vector<ParamVector> results(children.size());
                for (size_t i = 0; i < children.size(); ++i)
                    results[i] = run(children[i], w, global_round,
                                     derive_seed(round_seed, {static_cast<uint64_t>(i)}));
                std::vector<std::pair<const ParamVector*, double>> contribs;
                contribs.reserve(children.size());
                for (size_t i = 0; i < children.size(); ++i)
                    contribs.push_back({&results[i], node_weight(children[i])});
                w = weighted_average(contribs);
            }

            tr.digest = param_digest(w);
            tr.wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - started)
                             .count();
            record(std::move(tr));
        }
        return w;
    }
};

void validate_plan(const FederationPlan& plan) {
    if (!plan.tree || !plan.net || !plan.shards)
        throw std::invalid_argument("federation: plan missing tree, net, or shards");
    if (static_cast<int>(plan.schedule.rounds_per_level.size()) != plan.tree->num_levels() - 1)
        throw std::invalid_argument("federation: schedule must cover every server level");
    for (int r : plan.schedule.rounds_per_level)
        if (r < 1) throw std::invalid_argument("federation: every T_l must be >= 1");
}

}  // namespace

ParamVector aggregate(const FederationPlan& plan, NodeId server, ParamVector w,
                      int global_round, uint64_t path_seed) {
    validate_plan(plan);
    AggregateEngine engine(plan);
    return engine.run(server, std::move(w), global_round, path_seed);
}

RunResult run_hfl(const FederationPlan& plan, const RoundEvaluator& evaluate) {
    validate_plan(plan);

    RunResult result;
    FederationPlan inner = plan;
    inner.trace = plan.trace ? plan.trace : &result.trace;

    ParamVector w = init_params(*plan.net, derive_seed(plan.run_seed, {0x77696e6974ULL}));

    const NodeId root = plan.tree->root();
    const int global_rounds = plan.schedule.rounds_per_level.at(0);
    const bool root_regional = root.level == plan.tree->regional_level();

    AggregateEngine root_engine(inner);
    for (int t = 1; t <= global_rounds; ++t) {
        const uint64_t round_seed = derive_seed(plan.run_seed, {0x676c6f62ULL, static_cast<uint64_t>(t)});
        if (root_regional) {
            // 2-level case: the cloud aggregates clients directly
            RoundTrace tr;
            tr.level = 0;
            tr.server = root;
            tr.round = t;
            tr.participants =
                select_clients(plan.tree->coverage(root), plan.selection, root, round_seed);
            w = root_engine.regional_round(root, w, t, 1, round_seed);
            tr.digest = param_digest(w);
            root_engine.record(std::move(tr));
        } else {
            const auto& children = plan.tree->coverage(root);
            std::vector<ParamVector> results(children.size());
            for (size_t i = 0; i < children.size(); ++i)
                results[i] = root_engine.run(children[i], w, t,
                                             derive_seed(round_seed, {static_cast<uint64_t>(i)}));
            std::vector<std::pair<const ParamVector*, double>> contribs;
            contribs.reserve(children.size());
            for (size_t i = 0; i < children.size(); ++i)
                contribs.push_back({&results[i], root_engine.node_weight(children[i])});
            w = weighted_average(contribs);
            RoundTrace tr;
            tr.level = 0;
            tr.server = root;
            tr.round = t;
            tr.participants = children;
            tr.digest = param_digest(w);
            root_engine.record(std::move(tr));
        }
        if (evaluate) result.report.rounds.push_back(evaluate(w, t));
    }

    result.report.seed = plan.run_seed;
    result.final_params = std::move(w);
    return result;
}

}  // namespace hfl
