#include "hfl/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "hfl/parallel.hpp"
#include "hfl/rng.hpp"

namespace hfl {

namespace {

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

void check_trigger(const TriggerSpec& trigger, Shape shape) {
    if (trigger.size < 1) throw std::invalid_argument("trigger: size must be >= 1");
    if (trigger.row < 0 || trigger.col < 0 || trigger.row + trigger.size > shape.h ||
        trigger.col + trigger.size > shape.w)
        throw std::invalid_argument("trigger: patch out of image bounds");
    if (static_cast<int>(trigger.pattern.size()) != trigger.size * trigger.size * shape.c)
        throw std::invalid_argument("trigger: pattern length must be size*size*channels");
}

}  // namespace

void stamp_trigger(std::vector<double>& pixels, Shape shape, const TriggerSpec& trigger) {
    check_trigger(trigger, shape);
    size_t pi = 0;
    for (int dy = 0; dy < trigger.size; ++dy)
        for (int dx = 0; dx < trigger.size; ++dx)
            for (int ch = 0; ch < shape.c; ++ch, ++pi)
                pixels[static_cast<size_t>(((trigger.row + dy) * shape.w + (trigger.col + dx)) *
                                           shape.c + ch)] = trigger.pattern[pi];
}

Dataset apply_tlf(const Dataset& shard, const TriggerSpec& trigger, uint64_t rng_seed) {
    check_trigger(trigger, shard.shape);
    if (trigger.target_label < 0 || trigger.target_label >= shard.num_classes)
        throw std::invalid_argument("trigger: target label out of range");
    if (!(trigger.poison_fraction > 0) || trigger.poison_fraction > 1)
        throw std::invalid_argument("trigger: poison fraction must be in (0,1]");

    const size_t n = shard.size();
    const size_t poison = std::min(
        n, static_cast<size_t>(std::lround(trigger.poison_fraction * static_cast<double>(n))));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto eng = make_engine(derive_seed(rng_seed, {0x746c66ULL}));
    std::shuffle(order.begin(), order.end(), eng);

    Dataset out = shard;
    for (size_t i = 0; i < poison; ++i) {
        Example& e = out.examples[static_cast<size_t>(order[i])];
        stamp_trigger(e.pixels, shard.shape, trigger);
        e.label = trigger.target_label;
    }
    return out;
}

Dataset apply_ulf(const Dataset& shard, uint64_t rng_seed) {
    if (shard.num_classes < 2) throw std::invalid_argument("apply_ulf: need >= 2 classes");
    Dataset out = shard;
    auto eng = make_engine(derive_seed(rng_seed, {0x756c66ULL}));
    std::uniform_int_distribution<int> dist(0, shard.num_classes - 2);
    for (Example& e : out.examples) {
        const int draw = dist(eng);
        e.label = draw >= e.label ? draw + 1 : draw;  // uniform over labels != original
    }
    return out;
}

ParamVector flip_sign(ParamVector params) {
    for (double& v : params) v = -v;
    return params;
}

Dataset stamp_eval_set(const Dataset& eval, const TriggerSpec& trigger) {
    check_trigger(trigger, eval.shape);
    Dataset out = eval;
    for (Example& e : out.examples) stamp_trigger(e.pixels, eval.shape, trigger);
    return out;
}

AttackHooks make_attack_hooks(const AttackScenario& scenario,
                              const std::vector<MaliciousRanges>& client_ranges) {
    AttackHooks hooks;
    if (scenario.kind == TrainingAttack::none) return hooks;

    std::map<NodeId, std::vector<std::pair<int, int>>> ranges;
    for (NodeId n : scenario.malicious_clients) ranges[n] = {};
    for (const MaliciousRanges& mr : client_ranges) ranges[mr.client] = mr.ranges;

    if (scenario.kind == TrainingAttack::tlf || scenario.kind == TrainingAttack::ulf) {
        if (scenario.kind == TrainingAttack::tlf && !scenario.trigger)
            throw std::invalid_argument("attack: tlf requires a trigger");
        const auto scenario_copy = scenario;
        hooks.pre_local_training = [scenario_copy, ranges](const HookCtx& ctx,
                                                           const Dataset& shard) {
            auto it = ranges.find(ctx.node);
            if (it == ranges.end()) return shard;
            // Seed by client only: the poisoned data is the same every round.
            const uint64_t seed =
                derive_seed(scenario_copy.seed, {0x706f69ULL, static_cast<uint64_t>(ctx.node.index)});
            auto poison = [&](const Dataset& part, uint64_t s) {
                return scenario_copy.kind == TrainingAttack::tlf
                           ? apply_tlf(part, *scenario_copy.trigger, s)
                           : apply_ulf(part, s);
            };
            if (it->second.empty()) return poison(shard, seed);
            // Poison only the listed index ranges (logical sub-shards).
            Dataset out = shard;
            int range_no = 0;
            for (const auto& [first, last] : it->second) {
                std::vector<int> idx(static_cast<size_t>(last - first));
                std::iota(idx.begin(), idx.end(), first);
                Dataset part = subset(shard, idx);
                part = poison(part, derive_seed(seed, {static_cast<uint64_t>(range_no++)}));
                for (int i = first; i < last; ++i)
                    out.examples[static_cast<size_t>(i)] =
                        std::move(part.examples[static_cast<size_t>(i - first)]);
            }
            return out;
        };
    } else if (scenario.kind == TrainingAttack::csf) {
        std::vector<NodeId> malicious = scenario.malicious_clients;
        std::sort(malicious.begin(), malicious.end());
        hooks.post_local_training = [malicious](const HookCtx& ctx, ParamVector& params) {
            if (std::binary_search(malicious.begin(), malicious.end(), ctx.node))
                params = flip_sign(std::move(params));
        };
    } else if (scenario.kind == TrainingAttack::ssf) {
        std::vector<NodeId> malicious = scenario.malicious_servers;
        std::sort(malicious.begin(), malicious.end());
        hooks.post_server_aggregate = [malicious](const HookCtx& ctx, ParamVector& params) {
            if (std::binary_search(malicious.begin(), malicious.end(), ctx.node))
                params = flip_sign(std::move(params));
        };
    }
    return hooks;
}

// -- inference-time attacks --------------------------------------------------

std::vector<double> fgsm(const GradientModel& model, std::span<const double> x, int label,
                         double eps) {
    if (eps < 0) throw std::invalid_argument("fgsm: eps must be >= 0");
    const std::vector<double> grad = model.input_gradient(x, label);
    std::vector<double> out(x.begin(), x.end());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(out[i] + eps * sign(grad[i]), 0.0, 1.0);
    return out;
}

std::vector<double> pgd(const GradientModel& model, std::span<const double> x, int label,
                        double eps, double alpha, int steps, bool random_start,
                        uint64_t rng_seed) {
    if (eps < 0) throw std::invalid_argument("pgd: eps must be >= 0");
    if (alpha <= 0) throw std::invalid_argument("pgd: alpha must be > 0");
    if (steps < 0) throw std::invalid_argument("pgd: steps must be >= 0");

    std::vector<double> adv(x.begin(), x.end());
    if (random_start) {
        auto eng = make_engine(derive_seed(rng_seed, {0x706764ULL}));
        std::uniform_real_distribution<double> uni(-eps, eps);
        for (size_t i = 0; i < adv.size(); ++i)
            adv[i] = std::clamp(adv[i] + uni(eng), 0.0, 1.0);
    }
    for (int it = 0; it < steps; ++it) {
        const std::vector<double> grad = model.input_gradient(adv, label);
        for (size_t i = 0; i < adv.size(); ++i) {
            double v = adv[i] + alpha * sign(grad[i]);
            v = std::clamp(v, x[i] - eps, x[i] + eps);  // project onto the eps ball
            adv[i] = std::clamp(v, 0.0, 1.0);
        }
    }
    return adv;
}

std::vector<double> jsma(const GradientModel& model, std::span<const double> x, int y_target,
                         double theta, double gamma) {
    if (theta <= 0) throw std::invalid_argument("jsma: theta must be > 0");
    if (!(gamma > 0) || gamma > 1) throw std::invalid_argument("jsma: gamma must be in (0,1]");
    if (y_target < 0 || y_target >= model.num_classes())
        throw std::invalid_argument("jsma: target class out of range");

    std::vector<double> adv(x.begin(), x.end());
    const size_t budget = static_cast<size_t>(
        std::ceil(gamma * static_cast<double>(adv.size())));
    std::vector<bool> touched(adv.size(), false);
    size_t modified = 0;

    while (modified < budget) {
        if (predict_class(model, adv) == y_target) break;
        // Saliency toward the target: increasing a pixel with positive
        // -dCE/dx raises the target-class probability.
        const std::vector<double> grad = model.input_gradient(adv, y_target);
        int best = -1;
        double best_saliency = 0;
        for (size_t i = 0; i < adv.size(); ++i) {
            if (touched[i] || adv[i] >= 1.0) continue;
            const double saliency = -grad[i];
            if (best < 0 || saliency > best_saliency) {
                best = static_cast<int>(i);
                best_saliency = saliency;
            }
        }
        if (best < 0) break;  // no modifiable pixel left
        adv[static_cast<size_t>(best)] =
            std::clamp(adv[static_cast<size_t>(best)] + theta, 0.0, 1.0);
        touched[static_cast<size_t>(best)] = true;
        ++modified;
    }
    return adv;
}

AdversarialPatch train_adversarial_patch(const GradientModel& model, const Dataset& sample_set,
                                         int patch_size, int target_label, int iterations,
                                         double lr, uint64_t rng_seed) {
    const Shape shape = model.input_shape();
    if (patch_size < 1 || patch_size > shape.h || patch_size > shape.w)
        throw std::invalid_argument("adversarial_patch: patch must fit the image");
    if (sample_set.empty()) throw std::invalid_argument("adversarial_patch: empty sample set");

    AdversarialPatch patch;
    patch.size = patch_size;
    patch.target_label = target_label;
    patch.pixels.resize(static_cast<size_t>(patch_size) * patch_size * shape.c);
    auto eng = make_engine(derive_seed(rng_seed, {0x706174ULL}));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (double& p : patch.pixels) p = uni(eng);

    std::uniform_int_distribution<size_t> pick(0, sample_set.size() - 1);
    std::uniform_int_distribution<int> prow(0, shape.h - patch_size);
    std::uniform_int_distribution<int> pcol(0, shape.w - patch_size);
    for (int it = 0; it < iterations; ++it) {
        const Example& e = sample_set.examples[pick(eng)];
        const int row = prow(eng);
        const int col = pcol(eng);
        std::vector<double> stamped = e.pixels;
        size_t pi = 0;
        for (int dy = 0; dy < patch_size; ++dy)
            for (int dx = 0; dx < patch_size; ++dx)
                for (int ch = 0; ch < shape.c; ++ch, ++pi)
                    stamped[static_cast<size_t>(((row + dy) * shape.w + (col + dx)) * shape.c + ch)] =
                        patch.pixels[pi];
        // Descend the target-class cross-entropy; the stamped pixels equal
        // the patch pixels, so the chain rule is a direct copy.
        const std::vector<double> grad = model.input_gradient(stamped, target_label);
        pi = 0;
        for (int dy = 0; dy < patch_size; ++dy)
            for (int dx = 0; dx < patch_size; ++dx)
                for (int ch = 0; ch < shape.c; ++ch, ++pi) {
                    const size_t xi =
                        static_cast<size_t>(((row + dy) * shape.w + (col + dx)) * shape.c + ch);
                    patch.pixels[pi] = std::clamp(patch.pixels[pi] - lr * grad[xi], 0.0, 1.0);
                }
    }
    return patch;
}

std::vector<double> apply_patch(const AdversarialPatch& patch, std::span<const double> x,
                                Shape shape, uint64_t rng_seed) {
    auto eng = make_engine(derive_seed(rng_seed, {0x61707061ULL}));
    std::uniform_int_distribution<int> prow(0, shape.h - patch.size);
    std::uniform_int_distribution<int> pcol(0, shape.w - patch.size);
    const int row = prow(eng);
    const int col = pcol(eng);
    std::vector<double> out(x.begin(), x.end());
    size_t pi = 0;
    for (int dy = 0; dy < patch.size; ++dy)
        for (int dx = 0; dx < patch.size; ++dx)
            for (int ch = 0; ch < shape.c; ++ch, ++pi)
                out[static_cast<size_t>(((row + dy) * shape.w + (col + dx)) * shape.c + ch)] =
                    patch.pixels[pi];
    return out;
}

std::vector<double> square_attack(const ForwardModel& model, std::span<const double> x, int label,
                                  double eps, int iterations, double initial_p,
                                  uint64_t rng_seed) {
    if (eps < 0) throw std::invalid_argument("square_attack: eps must be >= 0");
    if (initial_p <= 0 || initial_p > 1)
        throw std::invalid_argument("square_attack: initial_p must be in (0,1]");
    const Shape shape = model.input_shape();

    std::vector<double> best(x.begin(), x.end());
    if (iterations <= 0 || eps == 0) return best;
    double best_loss = model.loss(best, label);

    auto eng = make_engine(derive_seed(rng_seed, {0x737161ULL}));
    std::uniform_int_distribution<int> coin(0, 1);

    for (int it = 0; it < iterations; ++it) {
        // square side from a halving schedule over the iteration budget
        double p = initial_p;
        const double frac = static_cast<double>(it) / static_cast<double>(iterations);
        if (frac >= 0.1) p /= 2;
        if (frac >= 0.25) p /= 2;
        if (frac >= 0.5) p /= 2;
        int side = static_cast<int>(std::lround(std::sqrt(p * shape.h * shape.w)));
        side = std::clamp(side, 1, std::min(shape.h, shape.w));

        std::uniform_int_distribution<int> prow(0, shape.h - side);
        std::uniform_int_distribution<int> pcol(0, shape.w - side);
        const int row = prow(eng);
        const int col = pcol(eng);
        std::vector<double> delta(static_cast<size_t>(shape.c));
        for (double& d : delta) d = coin(eng) ? eps : -eps;

        std::vector<double> proposal = best;
        for (int dy = 0; dy < side; ++dy)
            for (int dx = 0; dx < side; ++dx)
                for (int ch = 0; ch < shape.c; ++ch) {
                    const size_t i =
                        static_cast<size_t>(((row + dy) * shape.w + (col + dx)) * shape.c + ch);
                    proposal[i] = std::clamp(x[i] + delta[static_cast<size_t>(ch)], 0.0, 1.0);
                }
        const double loss = model.loss(proposal, label);
        if (loss > best_loss) {
            best_loss = loss;
            best = std::move(proposal);
        }
    }
    return best;
}

namespace {

// Bilinear sample with zero padding outside the image.
double sample_bilinear(std::span<const double> img, Shape shape, double y, double x, int ch) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0;
    const double fx = x - x0;
    auto at = [&](int yy, int xx) -> double {
        if (yy < 0 || yy >= shape.h || xx < 0 || xx >= shape.w) return 0.0;
        return img[static_cast<size_t>((yy * shape.w + xx) * shape.c + ch)];
    };
    return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
           fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
}

std::vector<double> rotate_translate(std::span<const double> img, Shape shape, double deg,
                                     int tx, int ty) {
    const double rad = deg * std::acos(-1.0) / 180.0;
    const double c = std::cos(rad);
    const double s = std::sin(rad);
    const double cy = (shape.h - 1) / 2.0;
    const double cx = (shape.w - 1) / 2.0;
    std::vector<double> out(img.size());
    for (int y = 0; y < shape.h; ++y) {
        for (int x = 0; x < shape.w; ++x) {
            // inverse map: destination -> source
            const double sy = c * (y - ty - cy) + s * (x - tx - cx) + cy;
            const double sx = -s * (y - ty - cy) + c * (x - tx - cx) + cx;
            for (int ch = 0; ch < shape.c; ++ch)
                out[static_cast<size_t>((y * shape.w + x) * shape.c + ch)] =
                    sample_bilinear(img, shape, sy, sx, ch);
        }
    }
    return out;
}

}  // namespace

std::vector<double> spatial_transform(const ForwardModel& model, std::span<const double> x,
                                      int label, const std::vector<double>& rotations_deg,
                                      const std::vector<int>& translations) {
    if (rotations_deg.empty() || translations.empty())
        throw std::invalid_argument("spatial_transform: grids must be nonempty");
    const Shape shape = model.input_shape();
    std::vector<double> best(x.begin(), x.end());
    double best_loss = -1;
    for (double deg : rotations_deg) {
        for (int tx : translations) {
            for (int ty : translations) {
                std::vector<double> candidate =
                    (deg == 0.0 && tx == 0 && ty == 0)
                        ? std::vector<double>(x.begin(), x.end())
                        : rotate_translate(x, shape, deg, tx, ty);
                const double loss = model.loss(candidate, label);
                if (loss > best_loss) {
                    best_loss = loss;
                    best = std::move(candidate);
                }
            }
        }
    }
    return best;
}

Dataset generate_adversarial_set(const GradientModel& model, const Dataset& eval,
                                 const ItaConfig& cfg, int workers) {
    Dataset out = eval;
    if (cfg.kind == ItaKind::patch) {
        const AdversarialPatch patch =
            train_adversarial_patch(model, eval, cfg.patch_size, cfg.patch_target,
                                    cfg.patch_iterations, cfg.patch_lr, cfg.seed);
        for (size_t i = 0; i < out.size(); ++i)
            out.examples[i].pixels =
                apply_patch(patch, eval.examples[i].pixels, eval.shape,
                            derive_seed(cfg.seed, {0x706c61636dULL, static_cast<uint64_t>(i)}));
        return out;
    }
    parallel_for(static_cast<int>(eval.size()), workers, [&](int i) {
        const Example& e = eval.examples[static_cast<size_t>(i)];
        Example& o = out.examples[static_cast<size_t>(i)];
        const uint64_t seed = derive_seed(cfg.seed, {0x697461ULL, static_cast<uint64_t>(i)});
        switch (cfg.kind) {
            case ItaKind::none:
                break;
            case ItaKind::fgsm:
                o.pixels = fgsm(model, e.pixels, e.label, cfg.eps);
                break;
            case ItaKind::pgd:
                o.pixels = pgd(model, e.pixels, e.label, cfg.eps, cfg.alpha, cfg.steps,
                               cfg.random_start, seed);
                break;
            case ItaKind::jsma:
                o.pixels = jsma(model, e.pixels, cfg.jsma_target, cfg.jsma_theta, cfg.jsma_gamma);
                break;
            case ItaKind::square:
                o.pixels = square_attack(model, e.pixels, e.label, cfg.eps,
                                         cfg.square_iterations, cfg.square_initial_p, seed);
                break;
            case ItaKind::st:
                o.pixels = spatial_transform(model, e.pixels, e.label, cfg.st_rotations,
                                             cfg.st_translations);
                break;
            case ItaKind::patch:
                break;  // handled above
        }
    });
    return out;
}

}  // namespace hfl
