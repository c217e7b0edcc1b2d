#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hfl/attacks.hpp"
#include "hfl/defenses.hpp"
#include "hfl/federation.hpp"
#include "hfl/learner.hpp"
#include "hfl/topology.hpp"

namespace hfl {

struct DatasetConfig {
    std::string kind = "synthetic";  // synthetic | idx
    int classes = 5;
    int per_class = 300;
    int eval_per_class = 40;
    Shape shape{8, 8, 1};
    double noise = 0.2;
    double alpha = 0.5;
    uint64_t seed = 42;
    // one physical client may hold several logical shards (centralized
    // baseline); 0 means one shard per client
    int virtual_shards = 0;
    std::string images, labels, eval_images, eval_labels;  // idx kind
};

struct AttackConfig {
    TrainingAttack kind = TrainingAttack::none;
    int malicious_count = 0;
    std::vector<int> malicious_clients;  // explicit shard indices; overrides count
    int malicious_server_count = 0;
    std::vector<int> malicious_servers;  // explicit regional indices
    bool overlap = false;
    uint64_t seed = 0;
    TriggerSpec trigger;  // row/col of -1 resolve to the bottom-right corner
    double trigger_value = 1.0;
};

struct NcConfig {
    bool enabled = false;
    double lambda = 0.01;
    double threshold = 2.0;
    int steps = 200;
    double lr = 0.2;
    int batch = 32;
    int clean_count = 200;
    int unlearn_epochs = 2;
    double stamp_fraction = 0.2;
    uint64_t seed = 0;
};

struct ItaSection {
    ItaConfig cfg;
    int eval_count = 0;  // 0 = full eval set
    bool export_idx = false;
};

struct RunConfig {
    uint64_t seed = 1;
    std::string out_dir;
    TopologyConfig topology{3, {20, 5}, 0};
    uint64_t overlap_seed = 7;
    DatasetConfig dataset;
    ModelSpec model;  // defaulted to dense(32)+relu+softmax(classes) when absent
    TrainingHyper hyper;
    AggregationSchedule schedule{{20, 2}};
    SelectionPolicy selection;
    AttackConfig attack;
    ItaSection ita;
    NcConfig nc;
    AtConfig at;
};

// Parses and fully validates a JSON run configuration. Unknown keys, type
// errors and cross-section inconsistencies are reported with their key path.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Canonical JSON form with every default made explicit; basis of the digest.
nlohmann::json config_to_json(const RunConfig& config);

// FNV-1a over the canonical serialization, as a hex string.
std::string config_digest(const RunConfig& config);

struct SweepSpec {
    struct Axis {
        std::string key;  // dotted path, e.g. "attack.malicious_count"
        std::vector<nlohmann::json> values;
    };
    std::vector<Axis> axes;
    std::vector<uint64_t> seeds;
};

SweepSpec parse_sweep(const std::string& text);
SweepSpec parse_sweep_file(const std::string& path);

// Applies one dotted-path override onto a config JSON document.
void apply_override(nlohmann::json& doc, const std::string& key, const nlohmann::json& value);

}  // namespace hfl
