#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hfl/dataset.hpp"
#include "hfl/federation.hpp"
#include "hfl/model_handle.hpp"
#include "hfl/topology.hpp"

namespace hfl {

// Backdoor trigger: a p x p pixel patch stamped at (row, col), examples
// relabeled to target_label for a poison_fraction of the shard.
struct TriggerSpec {
    int row = 0;
    int col = 0;
    int size = 2;
    std::vector<double> pattern;  // size*size*channels values in [0,1]
    int target_label = 0;
    double poison_fraction = 0.5;
};

enum class TrainingAttack { none, tlf, ulf, csf, ssf };

struct AttackScenario {
    TrainingAttack kind = TrainingAttack::none;
    std::vector<NodeId> malicious_clients;
    std::vector<NodeId> malicious_servers;  // regional servers, ssf only
    std::optional<TriggerSpec> trigger;
    uint64_t seed = 0;
};

// -- training-time attacks ---------------------------------------------------

// Stamps the trigger and relabels a seeded poison_fraction of the shard.
Dataset apply_tlf(const Dataset& shard, const TriggerSpec& trigger, uint64_t rng_seed);

// Replaces every label with a uniformly random different one.
Dataset apply_ulf(const Dataset& shard, uint64_t rng_seed);

// Negates every parameter; shared transform behind CSF and SSF.
ParamVector flip_sign(ParamVector params);

// Stamp the trigger pattern onto one example's pixels (no relabeling).
void stamp_trigger(std::vector<double>& pixels, Shape shape, const TriggerSpec& trigger);

// Eval-set variant of the backdoor: trigger stamped on every example, true
// labels retained (the tasr metric applies its own filter).
Dataset stamp_eval_set(const Dataset& eval, const TriggerSpec& trigger);

// Wires a scenario into federation hooks. Identity hooks for `none`.
// Malicious clients may carry per-client poison index ranges (used when one
// physical client aggregates several logical shards, e.g. the centralized
// baseline); empty means the whole shard.
struct MaliciousRanges {
    NodeId client;
    std::vector<std::pair<int, int>> ranges;  // [first, last) example indices
};
AttackHooks make_attack_hooks(const AttackScenario& scenario,
                              const std::vector<MaliciousRanges>& client_ranges = {});

// -- inference-time attacks --------------------------------------------------

enum class ItaKind { none, fgsm, pgd, jsma, patch, square, st };

struct ItaConfig {
    ItaKind kind = ItaKind::none;
    double eps = 0.3;        // L-inf budget (fgsm/pgd/square)
    double alpha = 0.075;    // pgd step
    int steps = 10;          // pgd iterations
    bool random_start = false;
    double jsma_theta = 0.2;
    double jsma_gamma = 0.1;       // max fraction of pixels changed
    int jsma_target = 0;
    int patch_size = 2;
    int patch_iterations = 200;
    double patch_lr = 0.05;
    int patch_target = 0;
    int square_iterations = 500;
    double square_initial_p = 0.25;
    std::vector<double> st_rotations = {-30, -15, 0, 15, 30};  // degrees
    std::vector<int> st_translations = {-2, 0, 2};             // pixels, per axis
    uint64_t seed = 0;
};

// x + eps * sign(grad), clipped to [0,1].
std::vector<double> fgsm(const GradientModel& model, std::span<const double> x, int label,
                         double eps);

// Iterated sign steps projected onto the eps ball around x0 and [0,1].
std::vector<double> pgd(const GradientModel& model, std::span<const double> x, int label,
                        double eps, double alpha, int steps, bool random_start,
                        uint64_t rng_seed);

// Greedy single-pixel saliency perturbation toward y_target; stops at
// prediction flip or after ceil(gamma * pixel_count) modified pixels.
std::vector<double> jsma(const GradientModel& model, std::span<const double> x, int y_target,
                         double theta, double gamma);

struct AdversarialPatch {
    std::vector<double> pixels;  // size*size*channels
    int size = 0;
    int target_label = 0;
};

// Universal patch optimized by gradient steps toward the target class over
// seeded images and placements.
AdversarialPatch train_adversarial_patch(const GradientModel& model, const Dataset& sample_set,
                                         int patch_size, int target_label, int iterations,
                                         double lr, uint64_t rng_seed);

// Stamp the patch at a seeded position.
std::vector<double> apply_patch(const AdversarialPatch& patch, std::span<const double> x,
                                Shape shape, uint64_t rng_seed);

// Score-based random search over square perturbations; forward queries only.
std::vector<double> square_attack(const ForwardModel& model, std::span<const double> x, int label,
                                  double eps, int iterations, double initial_p,
                                  uint64_t rng_seed);

// Exhaustive rotation x translation grid, bilinear resampling with zero
// padding; returns the loss-maximizing transform. Forward queries only.
std::vector<double> spatial_transform(const ForwardModel& model, std::span<const double> x,
                                      int label, const std::vector<double>& rotations_deg,
                                      const std::vector<int>& translations);

// Applies the configured attack to every eval example against `model`.
Dataset generate_adversarial_set(const GradientModel& model, const Dataset& eval,
                                 const ItaConfig& cfg, int workers);

}  // namespace hfl
