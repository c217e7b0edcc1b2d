#pragma once

#include <cstdint>
#include <vector>

#include "hfl/attacks.hpp"
#include "hfl/dataset.hpp"
#include "hfl/learner.hpp"
#include "hfl/model_handle.hpp"

namespace hfl {

// Per-class reverse-engineered trigger: blend x' = (1-mask)*x + mask*pattern.
struct ReversedTrigger {
    int class_label = 0;
    std::vector<double> mask;     // in [0,1], one value per pixel slot
    std::vector<double> pattern;  // in [0,1]
    double l1_mask_norm = 0;
};

struct NcOptions {
    double lambda = 0.01;       // L1 penalty on the mask
    int steps = 200;
    int batch = 32;
    double lr = 0.2;
    double success_target = 0.95;  // trigger success rate the penalty aims for
    int max_restarts = 3;          // lambda halves per restart when below target
    uint64_t seed = 0;
    // recorded every 10 steps; non-increasing by construction
    std::vector<double>* objective_checkpoints = nullptr;
};

// Gradient descent over (mask, pattern), sigmoid-parameterized, minimizing
// target-class cross-entropy on the clean set plus lambda * ||mask||_1.
ReversedTrigger reverse_trigger(const GradientModel& model, const Dataset& clean_set,
                                int class_label, const NcOptions& opts);

struct AnomalyReport {
    std::vector<double> l1_norms;       // per class
    double median = 0;
    double mad = 0;
    std::vector<double> anomaly_index;  // |norm - median| / (1.4826 * MAD)
    std::vector<int> flagged;           // classes over threshold on the low side
    double threshold = 2.0;
};

// Median-absolute-deviation outlier test over per-class trigger norms.
AnomalyReport detect_backdoor(const std::vector<ReversedTrigger>& triggers, double threshold);

// Fine-tunes on clean data with a stamp_fraction of examples blended with the
// reversed trigger but keeping their true labels.
ParamVector unlearn_backdoor(const Network& net, ParamVector params, const Dataset& clean_set,
                             const ReversedTrigger& trigger, const TrainingHyper& hyper,
                             double stamp_fraction, uint64_t rng_seed);

struct AtConfig {
    bool enabled = false;
    ItaKind generator = ItaKind::pgd;  // fgsm or pgd
    double eps = 0.3;
    double fraction = 0.5;  // share of each minibatch replaced
    int steps = 5;          // pgd iterations; alpha = eps/4
};

// Batch hook for client_update: replaces round(fraction*|batch|) leading
// examples with adversarial counterparts generated against the current local
// weights; labels unchanged. fraction 0 leaves training bit-identical.
BatchHook adversarial_training_hook(const AtConfig& cfg, const Network& net);

}  // namespace hfl
