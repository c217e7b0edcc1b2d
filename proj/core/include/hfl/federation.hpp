#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hfl/dataset.hpp"
#include "hfl/learner.hpp"
#include "hfl/metrics.hpp"
#include "hfl/topology.hpp"

namespace hfl {

struct AggregationSchedule {
    // rounds_per_level[l] = T_l for server levels 0..L-2
    std::vector<int> rounds_per_level;
};

enum class SelectionMode { fixed_per_run, resample_per_round };

struct SelectionPolicy {
    double participation = 1.0;  // C_p in (0,1]
    SelectionMode mode = SelectionMode::fixed_per_run;
    uint64_t seed = 0;
};

// Context handed to attack hooks: which node is acting, under which parent,
// in which global/local round, plus a derived seed for the hook's own use.
struct HookCtx {
    NodeId node;
    NodeId parent;
    int global_round = 0;
    int local_round = 0;
    uint64_t seed = 0;
};

// Identity when default-constructed; attack scenarios install real ones.
struct AttackHooks {
    std::function<Dataset(const HookCtx&, const Dataset&)> pre_local_training;
    std::function<void(const HookCtx&, ParamVector&)> post_local_training;
    std::function<void(const HookCtx&, ParamVector&)> post_server_aggregate;
};

struct RoundTrace {
    int level = 0;
    NodeId server;
    int round = 0;  // 1-based within this server's loop
    std::vector<NodeId> participants;
    uint64_t digest = 0;
    double wall_ms = 0;  // observability only; never serialized into reports
};

// Coordinate-wise weighted mean. Rejects empty input, length mismatches and
// non-positive weights.
ParamVector weighted_average(const std::vector<std::pair<const ParamVector*, double>>& updates);
ParamVector weighted_average(const std::vector<std::pair<ParamVector, double>>& updates);

// ceil(C_p * |cov|) clients, deterministic given (policy.seed, server) and,
// in resample mode, the round counter. Result sorted by index.
std::vector<NodeId> select_clients(const std::vector<NodeId>& cov, const SelectionPolicy& policy,
                                   NodeId server, uint64_t round_counter);

// Everything the recursive aggregation needs, wired once per run.
struct FederationPlan {
    const HflTree* tree = nullptr;
    const Network* net = nullptr;
    TrainingHyper hyper;
    AggregationSchedule schedule;
    SelectionPolicy selection;
    AttackHooks hooks;
    BatchHook batch_hook;                     // adversarial-training insert
    const std::vector<Dataset>* shards = nullptr;  // by client index
    uint64_t run_seed = 0;
    int workers = 1;
    std::vector<RoundTrace>* trace = nullptr;  // optional sink
};

// Recursive aggregation at `server` starting from `w`: regional servers run
// client rounds, upper servers re-aggregate child subtrees; the configured
// T_l rounds thread the weights between iterations. `path_seed` identifies
// the position in the recursion so every nested RNG stream is unique.
ParamVector aggregate(const FederationPlan& plan, NodeId server, ParamVector w,
                      int global_round, uint64_t path_seed);

// Per-global-round evaluation callback; returns the record for the report.
using RoundEvaluator = std::function<RoundRecord(const ParamVector& params, int round)>;

struct RunResult {
    ParamVector final_params;
    MetricsReport report;
    std::vector<RoundTrace> trace;
};

// Full run: seeded init, T_0 global rounds at the root, evaluation after each.
RunResult run_hfl(const FederationPlan& plan, const RoundEvaluator& evaluate);

// Sum of shard sizes beneath each node (overlap clients count toward every
// parent). Throws if any server's subtree has zero samples.
std::vector<std::vector<double>> subtree_sample_counts(const HflTree& tree,
                                                       const std::vector<Dataset>& shards);

uint64_t param_digest(const ParamVector& params);

}  // namespace hfl
