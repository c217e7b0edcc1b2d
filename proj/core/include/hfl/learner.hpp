#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "hfl/model.hpp"

namespace hfl {

enum class Optimizer { sgd, adam };

struct TrainingHyper {
    int batch_size = 32;
    int epochs = 1;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    int64_t t = 0;
};

// Fan-in-scaled uniform weights, zero biases.
ParamVector init_params(const Network& net, uint64_t rng_seed);

struct LossGrad {
    double loss = 0;
    ParamVector grad;
};

// Mean cross-entropy over the batch and its exact gradient.
LossGrad loss_and_param_grad(const Network& net, const ParamVector& params,
                             std::span<const Example> batch);

// Exact gradient of the cross-entropy at (x, label) w.r.t. the pixels.
std::vector<double> input_grad(const Network& net, const ParamVector& params,
                               std::span<const double> x, int label);

// In-place parameter update. `state` is only consulted for adam.
void optimizer_step(ParamVector& params, const ParamVector& grad, const TrainingHyper& hyper,
                    AdamState& state);

// Invoked on each minibatch before the gradient step; may rewrite examples
// in place (adversarial training plugs in here).
using BatchHook =
    std::function<void(std::vector<Example>& batch, const ParamVector& current_params,
                       uint64_t batch_seed)>;

// Local training: seeded shuffle, `epochs` passes of `batch_size` minibatches,
// one optimizer step per batch, optimizer state fresh at call start.
ParamVector client_update(const Network& net, ParamVector params, const Dataset& shard,
                          const TrainingHyper& hyper, uint64_t rng_seed,
                          const BatchHook& batch_hook = nullptr);

}  // namespace hfl
