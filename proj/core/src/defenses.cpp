#include "hfl/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hfl/rng.hpp"

namespace hfl {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct TriggerParams {
    std::vector<double> theta_mask;
    std::vector<double> theta_pattern;
};

std::vector<double> blend(std::span<const double> x, const std::vector<double>& mask,
                          const std::vector<double>& pattern) {
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        out[i] = (1.0 - mask[i]) * x[i] + mask[i] * pattern[i];
    return out;
}

struct Objective {
    double value = 0;   // CE + lambda * ||mask||_1
    double success = 0; // fraction of the set classified as the target
};

Objective evaluate_trigger(const GradientModel& model, const Dataset& set, int target,
                           const std::vector<double>& mask, const std::vector<double>& pattern,
                           double lambda) {
    Objective obj;
    size_t hits = 0;
    for (const Example& e : set.examples) {
        const std::vector<double> xb = blend(e.pixels, mask, pattern);
        obj.value += model.loss(xb, target) / static_cast<double>(set.size());
        if (predict_class(model, xb) == target) ++hits;
    }
    obj.success = static_cast<double>(hits) / static_cast<double>(set.size());
    for (double m : mask) obj.value += lambda * m;
    return obj;
}

ReversedTrigger descend(const GradientModel& model, const Dataset& clean_set, int class_label,
                        const NcOptions& opts, double lambda, uint64_t seed) {
    const size_t n_px = clean_set.examples.front().pixels.size();
    TriggerParams tp;
    tp.theta_mask.resize(n_px);
    tp.theta_pattern.resize(n_px);
    auto eng = make_engine(derive_seed(seed, {0x6e63ULL, static_cast<uint64_t>(class_label)}));
    std::normal_distribution<double> gauss(0.0, 0.5);
    for (double& v : tp.theta_mask) v = gauss(eng) - 2.0;  // start near-transparent
    for (double& v : tp.theta_pattern) v = gauss(eng);

    auto materialize = [&](const TriggerParams& p) {
        std::pair<std::vector<double>, std::vector<double>> mp;
        mp.first.resize(n_px);
        mp.second.resize(n_px);
        for (size_t i = 0; i < n_px; ++i) {
            mp.first[i] = sigmoid(p.theta_mask[i]);
            mp.second[i] = sigmoid(p.theta_pattern[i]);
        }
        return mp;
    };

    double lr = opts.lr;
    auto [mask, pattern] = materialize(tp);
    Objective best = evaluate_trigger(model, clean_set, class_label, mask, pattern, lambda);
    TriggerParams best_tp = tp;
    if (opts.objective_checkpoints) opts.objective_checkpoints->push_back(best.value);

    std::uniform_int_distribution<size_t> pick(0, clean_set.size() - 1);
    const int batch = std::max(1, std::min<int>(opts.batch, static_cast<int>(clean_set.size())));

    for (int step = 1; step <= opts.steps; ++step) {
        std::vector<double> g_mask(n_px, 0.0);
        std::vector<double> g_pattern(n_px, 0.0);
        for (int b = 0; b < batch; ++b) {
            const Example& e = clean_set.examples[pick(eng)];
            const std::vector<double> xb = blend(e.pixels, mask, pattern);
            const std::vector<double> gx = model.input_gradient(xb, class_label);
            for (size_t i = 0; i < n_px; ++i) {
                g_mask[i] += gx[i] * (pattern[i] - e.pixels[i]) / batch;
                g_pattern[i] += gx[i] * mask[i] / batch;
            }
        }
        for (size_t i = 0; i < n_px; ++i) {
            const double sm = mask[i] * (1.0 - mask[i]);       // d sigmoid
            const double sp = pattern[i] * (1.0 - pattern[i]);
            tp.theta_mask[i] -= lr * (g_mask[i] + lambda) * sm;
            tp.theta_pattern[i] -= lr * g_pattern[i] * sp;
        }
        std::tie(mask, pattern) = materialize(tp);

        if (step % 10 == 0 || step == opts.steps) {
            const Objective cur =
                evaluate_trigger(model, clean_set, class_label, mask, pattern, lambda);
            if (cur.value <= best.value) {
                best = cur;
                best_tp = tp;
            } else {
                // backoff: restore the best point and halve the step size
                tp = best_tp;
                std::tie(mask, pattern) = materialize(tp);
                lr *= 0.5;
            }
            if (opts.objective_checkpoints) opts.objective_checkpoints->push_back(best.value);
        }
    }

    std::tie(mask, pattern) = materialize(best_tp);
    ReversedTrigger out;
    out.class_label = class_label;
    out.mask = std::move(mask);
    out.pattern = std::move(pattern);
    out.l1_mask_norm = std::accumulate(out.mask.begin(), out.mask.end(), 0.0);
    return out;
}

}  // namespace

ReversedTrigger reverse_trigger(const GradientModel& model, const Dataset& clean_set,
                                int class_label, const NcOptions& opts) {
    if (clean_set.empty()) throw std::invalid_argument("reverse_trigger: empty clean set");
    if (class_label < 0 || class_label >= model.num_classes())
        throw std::invalid_argument("reverse_trigger: class out of range");

    double lambda = opts.lambda;
    ReversedTrigger result;
    for (int attempt = 0; attempt <= std::max(0, opts.max_restarts); ++attempt) {
        if (opts.objective_checkpoints && attempt > 0) opts.objective_checkpoints->clear();
        result = descend(model, clean_set, class_label, opts, lambda,
                         derive_seed(opts.seed, {static_cast<uint64_t>(attempt)}));
        if (opts.steps == 0) return result;
        const Objective obj =
            evaluate_trigger(model, clean_set, class_label, result.mask, result.pattern, lambda);
        if (obj.success >= opts.success_target) return result;
        lambda *= 0.5;  // mask penalty too aggressive for this class; relax and retry
    }
    return result;
}

AnomalyReport detect_backdoor(const std::vector<ReversedTrigger>& triggers, double threshold) {
    if (triggers.size() < 3)
        throw std::invalid_argument("detect_backdoor: need at least 3 classes for MAD");
    AnomalyReport report;
    report.threshold = threshold;
    for (const ReversedTrigger& t : triggers) report.l1_norms.push_back(t.l1_mask_norm);

    std::vector<double> sorted = report.l1_norms;
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    report.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    std::vector<double> dev;
    for (double v : report.l1_norms) dev.push_back(std::abs(v - report.median));
    std::vector<double> dev_sorted = dev;
    std::sort(dev_sorted.begin(), dev_sorted.end());
    report.mad = n % 2 ? dev_sorted[n / 2] : 0.5 * (dev_sorted[n / 2 - 1] + dev_sorted[n / 2]);

    for (size_t i = 0; i < n; ++i) {
        double index = 0;
        if (dev[i] > 0)
            index = report.mad > 0 ? dev[i] / (1.4826 * report.mad)
                                   : std::numeric_limits<double>::infinity();
        report.anomaly_index.push_back(index);
        // only anomalously SMALL triggers indicate a backdoor
        if (index > threshold && report.l1_norms[i] < report.median)
            report.flagged.push_back(static_cast<int>(i));
    }
    return report;
}

ParamVector unlearn_backdoor(const Network& net, ParamVector params, const Dataset& clean_set,
                             const ReversedTrigger& trigger, const TrainingHyper& hyper,
                             double stamp_fraction, uint64_t rng_seed) {
    if (clean_set.empty()) throw std::invalid_argument("unlearn_backdoor: empty clean set");
    if (stamp_fraction < 0 || stamp_fraction > 1)
        throw std::invalid_argument("unlearn_backdoor: stamp fraction must be in [0,1]");
    if (hyper.epochs == 0) return params;

    Dataset mixed = clean_set;
    const size_t stamped =
        static_cast<size_t>(std::lround(stamp_fraction * static_cast<double>(clean_set.size())));
    auto eng = make_engine(derive_seed(rng_seed, {0x756e6cULL}));
    std::vector<int> order(clean_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), eng);
    for (size_t i = 0; i < stamped; ++i) {
        Example& e = mixed.examples[static_cast<size_t>(order[i])];
        e.pixels = blend(e.pixels, trigger.mask, trigger.pattern);
        // true label kept: the blend must stop implying the attacker's class
    }
    return client_update(net, std::move(params), mixed, hyper,
                         derive_seed(rng_seed, {0x756e6c32ULL}));
}

BatchHook adversarial_training_hook(const AtConfig& cfg, const Network& net) {
    if (!cfg.enabled || cfg.fraction <= 0) return nullptr;
    if (cfg.generator != ItaKind::fgsm && cfg.generator != ItaKind::pgd)
        throw std::invalid_argument("adversarial_training_hook: generator must be fgsm or pgd");
    if (cfg.fraction > 1)
        throw std::invalid_argument("adversarial_training_hook: fraction must be in [0,1]");

    const AtConfig c = cfg;
    return [c, &net](std::vector<Example>& batch, const ParamVector& current, uint64_t seed) {
        const size_t count =
            std::min(batch.size(), static_cast<size_t>(std::lround(
                                       c.fraction * static_cast<double>(batch.size()))));
        if (count == 0) return;
        NetworkModel handle(net, current);
        for (size_t i = 0; i < count; ++i) {
            Example& e = batch[i];
            if (c.generator == ItaKind::fgsm) {
                e.pixels = fgsm(handle, e.pixels, e.label, c.eps);
            } else {
                e.pixels = pgd(handle, e.pixels, e.label, c.eps, c.eps / 4.0, c.steps,
                               /*random_start=*/false, derive_seed(seed, {static_cast<uint64_t>(i)}));
            }
        }
    };
}

}  // namespace hfl
