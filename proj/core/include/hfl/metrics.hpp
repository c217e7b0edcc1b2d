#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hfl/dataset.hpp"
#include "hfl/model_handle.hpp"

namespace hfl {

// Fraction of examples whose predicted class differs from the true label.
double misclassification_rate(const ForwardModel& model, const Dataset& eval);

// Fraction of adversarial examples (restricted to true label != target)
// classified as the attack target.
double tasr(const ForwardModel& model, const Dataset& adversarial, int target_label);

struct RoundRecord {
    int round = 0;  // 1-based global round
    double clean_mr = 0;
    std::optional<double> adv_mr;
    std::optional<double> tasr;
};

struct RunSummary {
    double final_clean_mr = 0;
    std::optional<double> final_tasr;
    std::optional<double> ita_mr;          // adversarial MR against the final model
    std::optional<double> tasr_before_nc;  // neural-cleanse before/after
    std::optional<double> tasr_after_nc;
    std::optional<double> clean_mr_after_nc;
    std::optional<int> nc_flagged_class;
};

struct MetricsReport {
    std::string run_id;
    std::string config_digest;
    uint64_t seed = 0;
    std::vector<RoundRecord> rounds;
    RunSummary summary;
};

}  // namespace hfl
