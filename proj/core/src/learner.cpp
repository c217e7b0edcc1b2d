#include "hfl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hfl/rng.hpp"

namespace hfl {

ParamVector init_params(const Network& net, uint64_t rng_seed) {
    ParamVector params(net.param_count(), 0.0);
    auto eng = make_engine(derive_seed(rng_seed, {0x696e6974ULL}));
    for (const auto& layout : net.layouts()) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layout.fan_in));
        std::uniform_real_distribution<double> uni(-bound, bound);
        for (size_t i = 0; i < layout.weight_count; ++i)
            params[layout.weight_offset + i] = uni(eng);
        // biases stay zero
    }
    return params;
}

LossGrad loss_and_param_grad(const Network& net, const ParamVector& params,
                             std::span<const Example> batch) {
    if (batch.empty()) throw std::invalid_argument("loss_and_param_grad: empty batch");
    LossGrad out;
    out.grad.assign(net.param_count(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const Example& e : batch)
        out.loss += scale * net.backward(params, e.pixels, e.label, &out.grad, nullptr, scale);
    return out;
}

std::vector<double> input_grad(const Network& net, const ParamVector& params,
                               std::span<const double> x, int label) {
    std::vector<double> grad;
    net.backward(params, x, label, nullptr, &grad);
    return grad;
}

void optimizer_step(ParamVector& params, const ParamVector& grad, const TrainingHyper& hyper,
                    AdamState& state) {
    if (params.size() != grad.size())
        throw std::invalid_argument("optimizer_step: parameter/gradient length mismatch");
    if (hyper.optimizer == Optimizer::sgd) {
        for (size_t i = 0; i < params.size(); ++i) params[i] -= hyper.learning_rate * grad[i];
        return;
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.t = 0;
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= hyper.learning_rate * mhat / (std::sqrt(vhat) + hyper.eps_adam);
    }
}

ParamVector client_update(const Network& net, ParamVector params, const Dataset& shard,
                          const TrainingHyper& hyper, uint64_t rng_seed,
                          const BatchHook& batch_hook) {
    if (shard.empty()) throw std::invalid_argument("client_update: empty shard");
    if (hyper.batch_size < 1) throw std::invalid_argument("client_update: batch_size must be >= 1");
    if (hyper.epochs < 0) throw std::invalid_argument("client_update: epochs must be >= 0");

    AdamState state;
    const size_t n = shard.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    uint64_t batch_counter = 0;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        auto eng = make_engine(derive_seed(rng_seed, {0x65706f6368ULL, static_cast<uint64_t>(epoch)}));
        std::shuffle(order.begin(), order.end(), eng);
        for (size_t start = 0; start < n; start += static_cast<size_t>(hyper.batch_size)) {
            const size_t stop = std::min(n, start + static_cast<size_t>(hyper.batch_size));
            std::vector<Example> batch;
            batch.reserve(stop - start);
            for (size_t i = start; i < stop; ++i)
                batch.push_back(shard.examples[static_cast<size_t>(order[i])]);
            if (batch_hook)
                batch_hook(batch, params, derive_seed(rng_seed, {0x6261746368ULL, batch_counter}));
            ++batch_counter;
            const LossGrad lg = loss_and_param_grad(net, params, batch);
            optimizer_step(params, lg.grad, hyper, state);
        }
    }
    return params;
}

}  // namespace hfl
