#include "hfl/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "hfl/parallel.hpp"
#include "hfl/rng.hpp"
#include "hfl/serialize.hpp"

namespace hfl {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

TriggerSpec resolve_trigger(const AttackConfig& attack, Shape shape) {
    TriggerSpec t = attack.trigger;
    if (t.row < 0) t.row = shape.h - t.size;
    if (t.col < 0) t.col = shape.w - t.size;
    if (t.pattern.empty())
        t.pattern.assign(static_cast<size_t>(t.size) * t.size * shape.c, attack.trigger_value);
    return t;
}

std::vector<int> sample_indices(int count, int population, uint64_t seed) {
    if (count > population)
        throw std::invalid_argument("scenario: malicious count exceeds population");
    std::vector<int> pool(static_cast<size_t>(population));
    std::iota(pool.begin(), pool.end(), 0);
    auto eng = make_engine(seed);
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> dist(i, population - 1);
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(dist(eng))]);
    }
    std::vector<int> out(pool.begin(), pool.begin() + count);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

Scenario assemble_scenario(const RunConfig& config) {
    // Section seeds are offsets of the run seed: a new --seed reseeds the
    // partition, the init, the attack placement, everything.
    const uint64_t data_seed = derive_seed(config.seed, {0x64617461ULL, config.dataset.seed});
    const uint64_t attack_seed = derive_seed(config.seed, {0x61746bULL, config.attack.seed});
    const uint64_t overlap_seed = derive_seed(config.seed, {0x6f7665ULL, config.overlap_seed});

    HflTree base = build_tree(
        TopologyConfig{config.topology.num_levels, config.topology.fanout_per_level, 0});
    Dataset train, eval;
    if (config.dataset.kind == "synthetic") {
        train = synth_dataset(config.dataset.classes, config.dataset.per_class,
                              config.dataset.shape, config.dataset.noise, data_seed);
        eval = synth_dataset(config.dataset.classes, config.dataset.eval_per_class,
                             config.dataset.shape, config.dataset.noise,
                             derive_seed(data_seed, {0x6576616cULL}));
    } else {
        train = load_idx(config.dataset.images, config.dataset.labels);
        eval = load_idx(config.dataset.eval_images, config.dataset.eval_labels);
        if (!(train.shape == eval.shape))
            throw std::invalid_argument("scenario: train/eval image shapes disagree");
    }

    const int clients = base.client_count();
    const int virtual_shards =
        config.dataset.virtual_shards > 0 ? config.dataset.virtual_shards : clients;
    const PartitionPlan plan = dirichlet_partition(
        train, virtual_shards, config.dataset.alpha, derive_seed(data_seed, {0x70617274ULL}));

    // Malicious shard indices (virtual when virtual_shards > clients).
    std::vector<int> malicious_shards = config.attack.malicious_clients;
    const bool client_side_attack = config.attack.kind == TrainingAttack::tlf ||
                                    config.attack.kind == TrainingAttack::ulf ||
                                    config.attack.kind == TrainingAttack::csf;

    HflTree tree = config.topology.num_overlap_clients > 0
                       ? place_overlap_clients(base, config.topology.num_overlap_clients,
                                               overlap_seed)
                       : base;

    if (client_side_attack && malicious_shards.empty() && config.attack.malicious_count > 0) {
        if (config.attack.overlap) {
            for (NodeId n : tree.overlap_clients()) {
                if (static_cast<int>(malicious_shards.size()) >= config.attack.malicious_count)
                    break;
                malicious_shards.push_back(n.index);
            }
            if (static_cast<int>(malicious_shards.size()) < config.attack.malicious_count)
                throw std::invalid_argument(
                    "scenario: not enough overlap clients for the malicious count");
        } else {
            malicious_shards = sample_indices(config.attack.malicious_count, virtual_shards,
                                              derive_seed(attack_seed, {0x6d636cULL}));
        }
    }
    std::sort(malicious_shards.begin(), malicious_shards.end());

    // Physical client shards: client i owns virtual shards j with
    // floor(j*clients/virtual)=i, concatenated in order of j. Ranges of
    // malicious virtual shards are remembered for the poisoning hook.
    const Shape in_shape =
        config.dataset.kind == "synthetic" ? config.dataset.shape : train.shape;
    Scenario s{std::move(tree),
               std::move(train),
               std::move(eval),
               {},
               Network(config.model, in_shape),
               {},
               {},
               {}};
    if (s.net.num_classes() != s.train.num_classes)
        throw std::invalid_argument("scenario: model classes (" +
                                    std::to_string(s.net.num_classes()) +
                                    ") disagree with dataset classes (" +
                                    std::to_string(s.train.num_classes) + ")");

    const int client_level = s.tree.client_level();
    s.shards.resize(static_cast<size_t>(clients));
    std::vector<MaliciousRanges> ranges(static_cast<size_t>(clients));
    for (int i = 0; i < clients; ++i) ranges[static_cast<size_t>(i)].client = {client_level, i};

    for (int j = 0; j < virtual_shards; ++j) {
        const int owner = static_cast<int>(
            (static_cast<long long>(j) * clients) / virtual_shards);
        Dataset part = subset(s.train, plan.assignments[static_cast<size_t>(j)]);
        Dataset& shard = s.shards[static_cast<size_t>(owner)];
        const int first = static_cast<int>(shard.size());
        shard = shard.empty() ? std::move(part) : concat(shard, part);
        const int last = static_cast<int>(shard.size());
        if (std::binary_search(malicious_shards.begin(), malicious_shards.end(), j))
            ranges[static_cast<size_t>(owner)].ranges.push_back({first, last});
    }

    s.attack.kind = config.attack.kind;
    s.attack.seed = attack_seed;
    if (config.attack.kind == TrainingAttack::tlf) {
        s.trigger = resolve_trigger(config.attack, s.train.shape);
        s.attack.trigger = s.trigger;
    }
    if (client_side_attack) {
        for (const MaliciousRanges& r : ranges)
            if (!r.ranges.empty()) {
                s.attack.malicious_clients.push_back(r.client);
                // whole-shard poisoning needs no ranges
                if (virtual_shards != clients) s.malicious_ranges.push_back(r);
            }
    } else if (config.attack.kind == TrainingAttack::ssf) {
        std::vector<int> servers = config.attack.malicious_servers;
        if (servers.empty() && config.attack.malicious_server_count > 0)
            servers = sample_indices(config.attack.malicious_server_count,
                                     s.tree.level_size(s.tree.regional_level()),
                                     derive_seed(attack_seed, {0x6d737276ULL}));
        for (int idx : servers)
            s.attack.malicious_servers.push_back({s.tree.regional_level(), idx});
    }
    return s;
}

std::string rounds_csv(const MetricsReport& report) {
    std::string out = "round,clean_mr,adv_mr,tasr\n";
    for (const RoundRecord& r : report.rounds) {
        out += std::to_string(r.round);
        out += ',';
        out += fmt_double(r.clean_mr);
        out += ',';
        if (r.adv_mr) out += fmt_double(*r.adv_mr);
        out += ',';
        if (r.tasr) out += fmt_double(*r.tasr);
        out += '\n';
    }
    return out;
}

json report_to_json(const MetricsReport& report) {
    json rounds = json::array();
    for (const RoundRecord& r : report.rounds) {
        json rec{{"round", r.round}, {"clean_mr", r.clean_mr}};
        if (r.adv_mr) rec["adv_mr"] = *r.adv_mr;
        if (r.tasr) rec["tasr"] = *r.tasr;
        rounds.push_back(std::move(rec));
    }
    json summary{{"final_clean_mr", report.summary.final_clean_mr}};
    if (report.summary.final_tasr) summary["final_tasr"] = *report.summary.final_tasr;
    if (report.summary.ita_mr) summary["ita_mr"] = *report.summary.ita_mr;
    if (report.summary.tasr_before_nc) summary["tasr_before_nc"] = *report.summary.tasr_before_nc;
    if (report.summary.tasr_after_nc) summary["tasr_after_nc"] = *report.summary.tasr_after_nc;
    if (report.summary.clean_mr_after_nc)
        summary["clean_mr_after_nc"] = *report.summary.clean_mr_after_nc;
    if (report.summary.nc_flagged_class)
        summary["nc_flagged_class"] = *report.summary.nc_flagged_class;
    return json{{"run_id", report.run_id},
                {"config_digest", report.config_digest},
                {"seed", report.seed},
                {"rounds", rounds},
                {"summary", summary}};
}

int env_worker_count() {
    const char* raw = std::getenv("HFLSIM_WORKERS");
    if (!raw) return 1;
    const int n = std::atoi(raw);
    return n > 0 ? n : 1;
}

ScenarioResult run_scenario(const RunConfig& config, const std::string& out_dir, int workers) {
    const auto wall_start = std::chrono::steady_clock::now();
    Scenario s = assemble_scenario(config);

    FederationPlan plan;
    plan.tree = &s.tree;
    plan.net = &s.net;
    plan.hyper = config.hyper;
    plan.schedule = config.schedule;
    plan.selection = config.selection;
    plan.selection.seed = derive_seed(config.seed, {0x73656cULL, config.selection.seed});
    plan.hooks = make_attack_hooks(s.attack, s.malicious_ranges);
    plan.batch_hook = adversarial_training_hook(config.at, s.net);
    plan.shards = &s.shards;
    plan.run_seed = config.seed;
    plan.workers = workers;

    std::optional<Dataset> triggered_eval;
    if (s.trigger) triggered_eval = stamp_eval_set(s.eval, *s.trigger);

    RoundEvaluator evaluate = [&](const ParamVector& params, int round) {
        NetworkModel handle(s.net, params);
        RoundRecord rec;
        rec.round = round;
        rec.clean_mr = misclassification_rate(handle, s.eval);
        if (triggered_eval)
            rec.tasr = tasr(handle, *triggered_eval, s.trigger->target_label);
        return rec;
    };

    RunResult run = run_hfl(plan, evaluate);

    ScenarioResult result;
    result.report = std::move(run.report);
    result.final_params = std::move(run.final_params);
    result.trace = std::move(run.trace);
    result.report.config_digest = config_digest(config);
    result.report.run_id = result.report.config_digest + "-s" + std::to_string(config.seed);
    if (!result.report.rounds.empty()) {
        const RoundRecord& last = result.report.rounds.back();
        result.report.summary.final_clean_mr = last.clean_mr;
        result.report.summary.final_tasr = last.tasr;
    }

    NetworkModel final_model(s.net, result.final_params);

    std::optional<Dataset> adv_set;
    if (config.ita.cfg.kind != ItaKind::none) {
        Dataset basis = s.eval;
        if (config.ita.eval_count > 0 &&
            static_cast<size_t>(config.ita.eval_count) < basis.size())
            basis.examples.resize(static_cast<size_t>(config.ita.eval_count));
        ItaConfig ita = config.ita.cfg;
        ita.seed = derive_seed(config.seed, {0x697461ULL, ita.seed});
        adv_set = generate_adversarial_set(final_model, basis, ita, workers);
        result.report.summary.ita_mr = misclassification_rate(final_model, *adv_set);
    }

    if (config.nc.enabled) {
        const uint64_t nc_seed = derive_seed(config.seed, {0x6e63ULL, config.nc.seed});
        Dataset clean = s.eval;
        if (static_cast<size_t>(config.nc.clean_count) < clean.size())
            clean.examples.resize(static_cast<size_t>(config.nc.clean_count));

        std::vector<ReversedTrigger> triggers(static_cast<size_t>(s.net.num_classes()));
        parallel_for(s.net.num_classes(), workers, [&](int k) {
            NcOptions opts;
            opts.lambda = config.nc.lambda;
            opts.steps = config.nc.steps;
            opts.lr = config.nc.lr;
            opts.batch = config.nc.batch;
            opts.seed = nc_seed;
            triggers[static_cast<size_t>(k)] = reverse_trigger(final_model, clean, k, opts);
        });
        result.anomaly = detect_backdoor(triggers, config.nc.threshold);

        if (triggered_eval) {
            result.report.summary.tasr_before_nc =
                tasr(final_model, *triggered_eval, s.trigger->target_label);
        }
        if (!result.anomaly->flagged.empty()) {
            // unlearn the flagged class with the smallest reversed trigger
            int flagged = result.anomaly->flagged.front();
            for (int k : result.anomaly->flagged)
                if (result.anomaly->l1_norms[static_cast<size_t>(k)] <
                    result.anomaly->l1_norms[static_cast<size_t>(flagged)])
                    flagged = k;
            result.report.summary.nc_flagged_class = flagged;

            TrainingHyper ft = config.hyper;
            ft.epochs = config.nc.unlearn_epochs;
            ParamVector patched = unlearn_backdoor(
                s.net, result.final_params, clean, triggers[static_cast<size_t>(flagged)], ft,
                config.nc.stamp_fraction, derive_seed(nc_seed, {0x6674ULL}));
            NetworkModel patched_model(s.net, patched);
            if (triggered_eval)
                result.report.summary.tasr_after_nc =
                    tasr(patched_model, *triggered_eval, s.trigger->target_label);
            result.report.summary.clean_mr_after_nc =
                misclassification_rate(patched_model, s.eval);
            result.final_params = std::move(patched);
        }
    }

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        {
            std::ofstream f(fs::path(out_dir) / "report.json", std::ios::binary);
            f << report_to_json(result.report).dump(2) << "\n";
        }
        {
            std::ofstream f(fs::path(out_dir) / "rounds.csv", std::ios::binary);
            f << rounds_csv(result.report);
        }
        save_checkpoint((fs::path(out_dir) / "model.bin").string(), s.net.spec(),
                        s.net.input_shape(), result.final_params);
        if (result.anomaly) {
            const AnomalyReport& a = *result.anomaly;
            json doc{{"l1_norms", a.l1_norms},   {"median", a.median},
                     {"mad", a.mad},             {"anomaly_index", a.anomaly_index},
                     {"flagged", a.flagged},     {"threshold", a.threshold}};
            std::ofstream f(fs::path(out_dir) / "anomaly.json", std::ios::binary);
            f << doc.dump(2) << "\n";
        }
        if (adv_set && config.ita.export_idx) {
            write_idx(*adv_set, (fs::path(out_dir) / "adversarial-images.idx").string(),
                      (fs::path(out_dir) / "adversarial-labels.idx").string());
        }
        {
            // wall-clock lives only here, keeping the report byte-stable
            const double wall_s = std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - wall_start)
                                      .count();
            json meta{{"wall_seconds", wall_s}, {"workers", workers}};
            std::ofstream f(fs::path(out_dir) / "run_meta.json", std::ios::binary);
            f << meta.dump(2) << "\n";
        }
    }
    return result;
}

int run_sweep(const RunConfig& base, const SweepSpec& sweep, const std::string& out_dir,
              int workers) {
    namespace fs = std::filesystem;
    // enumerate the cross product (a single empty cell when no axes)
    std::vector<std::vector<size_t>> cells;
    std::vector<size_t> cursor(sweep.axes.size(), 0);
    while (true) {
        cells.push_back(cursor);
        size_t d = 0;
        for (; d < sweep.axes.size(); ++d) {
            if (++cursor[d] < sweep.axes[d].values.size()) break;
            cursor[d] = 0;
        }
        if (d == sweep.axes.size()) break;
    }

    struct Row {
        size_t cell;
        std::string axis_values;
        std::string seed;
        std::string metric;
        double value;
    };
    std::vector<std::vector<Row>> per_cell(cells.size());
    std::vector<int> failures(cells.size(), 0);

    const json base_doc = config_to_json(base);
    parallel_for(static_cast<int>(cells.size()), workers, [&](int ci) {
        const auto& cell = cells[static_cast<size_t>(ci)];
        json doc = base_doc;
        std::string axis_values;
        for (size_t d = 0; d < sweep.axes.size(); ++d) {
            const auto& axis = sweep.axes[d];
            apply_override(doc, axis.key, axis.values[cell[d]]);
            if (!axis_values.empty()) axis_values += ';';
            axis_values += axis.key + "=" + axis.values[cell[d]].dump();
        }
        auto& rows = per_cell[static_cast<size_t>(ci)];

        std::map<std::string, std::vector<double>> collected;
        for (uint64_t seed : sweep.seeds) {
            try {
                json seeded = doc;
                seeded["seed"] = seed;
                RunConfig cfg = parse_config(seeded.dump());
                ScenarioResult res = run_scenario(cfg, "", 1);
                std::map<std::string, double> metrics;
                metrics["final_clean_mr"] = res.report.summary.final_clean_mr;
                if (res.report.summary.final_tasr)
                    metrics["final_tasr"] = *res.report.summary.final_tasr;
                if (res.report.summary.ita_mr) metrics["ita_mr"] = *res.report.summary.ita_mr;
                if (res.report.summary.tasr_after_nc)
                    metrics["tasr_after_nc"] = *res.report.summary.tasr_after_nc;
                for (const auto& [name, value] : metrics) {
                    rows.push_back({static_cast<size_t>(ci), axis_values,
                                    std::to_string(seed), name, value});
                    collected[name].push_back(value);
                }
            } catch (const std::exception& e) {
                failures[static_cast<size_t>(ci)] += 1;
                rows.push_back({static_cast<size_t>(ci), axis_values, std::to_string(seed),
                                "failed", 1.0});
                fprintf(stderr, "sweep cell %d seed %llu failed: %s\n", ci,
                        static_cast<unsigned long long>(seed), e.what());
            }
        }
        for (const auto& [name, values] : collected) {
            const double mean =
                std::accumulate(values.begin(), values.end(), 0.0) / values.size();
            rows.push_back(
                {static_cast<size_t>(ci), axis_values, "mean", "mean_" + name, mean});
        }
    });

    auto quote = [](std::string s) {
        std::string q = "\"";
        for (char ch : s) {
            q += ch;
            if (ch == '"') q += ch;  // CSV quote doubling
        }
        return q + "\"";
    };
    std::string csv = "cell_id,axis_values,seed,metric,value\n";
    for (const auto& rows : per_cell)
        for (const Row& r : rows)
            csv += std::to_string(r.cell) + "," + quote(r.axis_values) + "," + r.seed + "," +
                   r.metric + "," + fmt_double(r.value) + "\n";

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream f(fs::path(out_dir) / "sweep.csv", std::ios::binary);
        f << csv;
    }
    return std::accumulate(failures.begin(), failures.end(), 0);
}

}  // namespace hfl
