#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "hfl/config.hpp"
#include "hfl/scenario.hpp"

namespace {

hfl::RunConfig load(const std::string& config_path, long long seed_override) {
    hfl::RunConfig config = hfl::parse_config_file(config_path);
    if (seed_override >= 0) config.seed = static_cast<uint64_t>(seed_override);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hflsim: hierarchical federated learning attack/defense simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string sweep_path;
    std::string out_dir;
    long long seed_override = -1;

    CLI::App* run = app.add_subcommand("run", "run one configured experiment");
    run->add_option("--config", config_path, "run configuration file")->required();
    run->add_option("--seed", seed_override, "override the config seed");
    run->add_option("--out", out_dir, "output directory (default from the config)");

    CLI::App* sweep = app.add_subcommand("sweep", "run a sweep matrix over a base config");
    sweep->add_option("--config", config_path, "base configuration file")->required();
    sweep->add_option("--sweep", sweep_path, "sweep specification file")->required();
    sweep->add_option("--out", out_dir, "output directory (default from the config)");

    CLI::App* validate = app.add_subcommand("validate", "parse and validate a config");
    validate->add_option("--config", config_path, "configuration file")->required();

    CLI11_PARSE(app, argc, argv);
    const int workers = hfl::env_worker_count();

    try {
        if (validate->parsed()) {
            hfl::RunConfig config = hfl::parse_config_file(config_path);
            printf("ok: %s (digest %s)\n", config_path.c_str(),
                   hfl::config_digest(config).c_str());
            return 0;
        }
        if (run->parsed()) {
            hfl::RunConfig config = load(config_path, seed_override);
            const std::string out = !out_dir.empty() ? out_dir
                                    : !config.out_dir.empty() ? config.out_dir
                                                              : std::string("out");
            hfl::ScenarioResult result = hfl::run_scenario(config, out, workers);
            printf("run %s: %zu rounds, final clean MR %.4f", result.report.run_id.c_str(),
                   result.report.rounds.size(), result.report.summary.final_clean_mr);
            if (result.report.summary.final_tasr)
                printf(", final TASR %.4f", *result.report.summary.final_tasr);
            if (result.report.summary.ita_mr)
                printf(", adversarial MR %.4f", *result.report.summary.ita_mr);
            printf("\n  artifacts in %s\n", out.c_str());
            return 0;
        }
        // sweep
        hfl::RunConfig config = load(config_path, -1);
        hfl::SweepSpec spec = hfl::parse_sweep_file(sweep_path);
        const std::string out = !out_dir.empty() ? out_dir
                                : !config.out_dir.empty() ? config.out_dir
                                                          : std::string("out");
        const int failures = hfl::run_sweep(config, spec, out, workers);
        printf("sweep finished: %d failed cell run(s), results in %s/sweep.csv\n", failures,
               out.c_str());
        return failures == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
