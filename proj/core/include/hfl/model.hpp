#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "hfl/dataset.hpp"

namespace hfl {

// Layer vocabulary. A model is an ordered list ending in SoftmaxOutput.
struct ConvSpec {
    int kernel = 3;
    int channels = 32;
    bool maxpool = true;  // 2x2 stride-2 pool after the convolution
};
struct DenseSpec {
    int units = 32;
};
struct ReluSpec {};
struct SoftmaxOutputSpec {
    int classes = 10;
};
using LayerSpec = std::variant<ConvSpec, DenseSpec, ReluSpec, SoftmaxOutputSpec>;

struct ModelSpec {
    std::vector<LayerSpec> layers;
};

// Flat parameter vector: per layer, weights then biases, layers in order.
using ParamVector = std::vector<double>;

// A ModelSpec compiled against a concrete input shape: layer shapes checked,
// parameter offsets assigned. Stateless and const after construction, so one
// instance can serve any number of concurrent forward/backward calls.
class Network {
public:
    Network(ModelSpec spec, Shape input_shape);

    const ModelSpec& spec() const { return spec_; }
    Shape input_shape() const { return input_shape_; }
    size_t param_count() const { return param_count_; }
    int num_classes() const { return num_classes_; }

    // Class probabilities (stabilized softmax; sums to 1).
    std::vector<double> forward(const ParamVector& params, std::span<const double> x) const;

    // Cross-entropy at (x, label); adds scale * dLoss/dparams into
    // *param_grad when given, writes dLoss/dpixels into *input_grad when
    // given. Returns the loss.
    double backward(const ParamVector& params, std::span<const double> x, int label,
                    ParamVector* param_grad, std::vector<double>* input_grad,
                    double scale = 1.0) const;

    // fan-in per layer, for initialization
    struct LayerLayout {
        size_t weight_offset, weight_count, bias_offset, bias_count;
        int fan_in;
    };
    const std::vector<LayerLayout>& layouts() const { return layouts_; }

private:
    enum class Kind { conv, dense, relu, softmax };
    struct Compiled {
        Kind kind;
        Shape in_shape, out_shape;
        Shape conv_shape;  // conv output before pooling
        int kernel = 0, in_ch = 0, out_ch = 0;
        bool maxpool = false;
        int in_size = 0, out_size = 0;
        size_t w_off = 0, b_off = 0;
    };

    std::vector<double> run_forward(const ParamVector& params, std::span<const double> x,
                                    std::vector<std::vector<double>>* acts,
                                    std::vector<std::vector<double>>* pre_pool,
                                    std::vector<std::vector<int>>* pool_arg) const;

    ModelSpec spec_;
    Shape input_shape_;
    size_t param_count_ = 0;
    int num_classes_ = 0;
    std::vector<Compiled> layers_;
    std::vector<LayerLayout> layouts_;
};

}  // namespace hfl
