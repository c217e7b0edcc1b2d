#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hfl/config.hpp"
#include "hfl/metrics.hpp"

namespace hfl {

// A fully assembled experiment: everything run_scenario builds before
// training. Exposed so tests can poke at the pieces.
struct Scenario {
    HflTree tree;
    Dataset train;
    Dataset eval;
    std::vector<Dataset> shards;  // per client
    Network net;
    AttackScenario attack;
    std::optional<TriggerSpec> trigger;  // resolved against the image shape
    std::vector<MaliciousRanges> malicious_ranges;
};

Scenario assemble_scenario(const RunConfig& config);

struct ScenarioResult {
    MetricsReport report;
    ParamVector final_params;
    std::vector<RoundTrace> trace;
    std::optional<AnomalyReport> anomaly;
};

// Runs the configured experiment: training with hooks, per-round metrics,
// optional post-training inference attack and neural-cleanse pass. When
// out_dir is nonempty, writes report.json, rounds.csv, model checkpoint and
// (if applicable) anomaly.json plus a wall-clock sidecar.
ScenarioResult run_scenario(const RunConfig& config, const std::string& out_dir, int workers);

// Cross product of sweep axes applied over the base config; every cell runs
// with every sweep seed. Returns the number of failed cells. Long-format
// results land in <out_dir>/sweep.csv.
int run_sweep(const RunConfig& base, const SweepSpec& sweep, const std::string& out_dir,
              int workers);

// Deterministic text of the per-round table (CSV "round,clean_mr,adv_mr,tasr").
std::string rounds_csv(const MetricsReport& report);

// Deterministic report JSON (no timestamps; those go in the sidecar).
nlohmann::json report_to_json(const MetricsReport& report);

int env_worker_count();  // HFLSIM_WORKERS, default 1

}  // namespace hfl
