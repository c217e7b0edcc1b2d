#pragma once

#include <span>
#include <vector>

#include "hfl/model.hpp"

namespace hfl {

// Query-only view of a trained model: all a black-box attacker gets.
class ForwardModel {
public:
    virtual ~ForwardModel() = default;
    virtual Shape input_shape() const = 0;
    virtual int num_classes() const = 0;
    virtual std::vector<double> predict(std::span<const double> x) const = 0;
    // cross-entropy of the prediction at (x, label)
    double loss(std::span<const double> x, int label) const;
};

// White-box view: adds pixel gradients.
class GradientModel : public ForwardModel {
public:
    virtual std::vector<double> input_gradient(std::span<const double> x, int label) const = 0;
};

// Adapter binding a compiled Network to a parameter vector. Holds references;
// both must outlive the handle.
class NetworkModel final : public GradientModel {
public:
    NetworkModel(const Network& net, const ParamVector& params) : net_(&net), params_(&params) {}
    Shape input_shape() const override { return net_->input_shape(); }
    int num_classes() const override { return net_->num_classes(); }
    std::vector<double> predict(std::span<const double> x) const override {
        return net_->forward(*params_, x);
    }
    std::vector<double> input_gradient(std::span<const double> x, int label) const override;

private:
    const Network* net_;
    const ParamVector* params_;
};

// argmax with ties broken toward the lowest class index
int predict_class(const ForwardModel& model, std::span<const double> x);

}  // namespace hfl
