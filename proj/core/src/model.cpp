#include "hfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hfl {

Network::Network(ModelSpec spec, Shape input_shape)
    : spec_(std::move(spec)), input_shape_(input_shape) {
    if (spec_.layers.empty()) throw std::invalid_argument("model: empty layer list");
    if (input_shape_.h <= 0 || input_shape_.w <= 0 || input_shape_.c <= 0)
        throw std::invalid_argument("model: input shape dimensions must be positive");

    Shape cur = input_shape_;
    size_t offset = 0;
    for (size_t li = 0; li < spec_.layers.size(); ++li) {
        const bool last = li + 1 == spec_.layers.size();
        Compiled cl;
        cl.in_shape = cur;
        cl.in_size = cur.size();
        if (const auto* conv = std::get_if<ConvSpec>(&spec_.layers[li])) {
            if (last) throw std::invalid_argument("model: final layer must be softmax-output");
            if (conv->kernel < 1 || conv->channels < 1)
                throw std::invalid_argument("model: conv kernel/channels must be >= 1");
            if (cur.h < conv->kernel || cur.w < conv->kernel)
                throw std::invalid_argument("model: conv kernel larger than input");
            cl.kind = Kind::conv;
            cl.kernel = conv->kernel;
            cl.in_ch = cur.c;
            cl.out_ch = conv->channels;
            cl.maxpool = conv->maxpool;
            cl.conv_shape = {cur.h - conv->kernel + 1, cur.w - conv->kernel + 1, conv->channels};
            cl.out_shape = cl.conv_shape;
            if (conv->maxpool) {
                if (cl.conv_shape.h < 2 || cl.conv_shape.w < 2)
                    throw std::invalid_argument("model: conv output too small for 2x2 pooling");
                cl.out_shape = {cl.conv_shape.h / 2, cl.conv_shape.w / 2, conv->channels};
            }
            cl.out_size = cl.out_shape.size();
            cl.w_off = offset;
            offset += static_cast<size_t>(conv->kernel) * conv->kernel * cl.in_ch * cl.out_ch;
            cl.b_off = offset;
            offset += static_cast<size_t>(cl.out_ch);
            layouts_.push_back({cl.w_off, cl.b_off - cl.w_off, cl.b_off,
                                static_cast<size_t>(cl.out_ch),
                                conv->kernel * conv->kernel * cl.in_ch});
        } else if (const auto* dense = std::get_if<DenseSpec>(&spec_.layers[li])) {
            if (last) throw std::invalid_argument("model: final layer must be softmax-output");
            if (dense->units < 1) throw std::invalid_argument("model: dense units must be >= 1");
            cl.kind = Kind::dense;
            cl.out_size = dense->units;
            cl.out_shape = {1, 1, dense->units};
            cl.w_off = offset;
            offset += static_cast<size_t>(cl.in_size) * cl.out_size;
            cl.b_off = offset;
            offset += static_cast<size_t>(cl.out_size);
            layouts_.push_back({cl.w_off, cl.b_off - cl.w_off, cl.b_off,
                                static_cast<size_t>(cl.out_size), cl.in_size});
        } else if (std::holds_alternative<ReluSpec>(spec_.layers[li])) {
            if (last) throw std::invalid_argument("model: final layer must be softmax-output");
            cl.kind = Kind::relu;
            cl.out_shape = cur;
            cl.out_size = cl.in_size;
        } else {
            const auto& sm = std::get<SoftmaxOutputSpec>(spec_.layers[li]);
            if (!last) throw std::invalid_argument("model: softmax-output must be the final layer");
            if (sm.classes < 2) throw std::invalid_argument("model: need at least 2 classes");
            cl.kind = Kind::softmax;
            cl.out_size = sm.classes;
            cl.out_shape = {1, 1, sm.classes};
            cl.w_off = offset;
            offset += static_cast<size_t>(cl.in_size) * cl.out_size;
            cl.b_off = offset;
            offset += static_cast<size_t>(cl.out_size);
            layouts_.push_back({cl.w_off, cl.b_off - cl.w_off, cl.b_off,
                                static_cast<size_t>(cl.out_size), cl.in_size});
            num_classes_ = sm.classes;
        }
        cur = cl.out_shape;
        layers_.push_back(cl);
    }
    if (num_classes_ == 0)
        throw std::invalid_argument("model: final layer must be softmax-output");
    param_count_ = offset;
}

namespace {

void softmax_inplace(std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        total += v;
    }
    for (double& v : logits) v /= total;
}

}  // namespace

std::vector<double> Network::run_forward(const ParamVector& params, std::span<const double> x,
                                         std::vector<std::vector<double>>* acts,
                                         std::vector<std::vector<double>>* pre_pool,
                                         std::vector<std::vector<int>>* pool_arg) const {
    if (params.size() != param_count_)
        throw std::invalid_argument("model: parameter vector length mismatch");
    if (static_cast<int>(x.size()) != input_shape_.size())
        throw std::invalid_argument("model: input size mismatch");

    std::vector<double> cur(x.begin(), x.end());
    if (acts) {
        acts->clear();
        acts->push_back(cur);
        pre_pool->assign(layers_.size(), {});
        pool_arg->assign(layers_.size(), {});
    }

    for (size_t li = 0; li < layers_.size(); ++li) {
        const Compiled& cl = layers_[li];
        std::vector<double> next(static_cast<size_t>(cl.out_size), 0.0);
        switch (cl.kind) {
            case Kind::conv: {
                const Shape in = cl.in_shape;
                const Shape cs = cl.conv_shape;
                std::vector<double> conv(static_cast<size_t>(cs.size()));
                for (int oc = 0; oc < cl.out_ch; ++oc) {
                    const double bias = params[cl.b_off + static_cast<size_t>(oc)];
                    for (int y = 0; y < cs.h; ++y) {
                        for (int xo = 0; xo < cs.w; ++xo) {
                            double sum = bias;
                            for (int ic = 0; ic < cl.in_ch; ++ic) {
                                const size_t wbase =
                                    cl.w_off + ((static_cast<size_t>(oc) * cl.in_ch + ic) *
                                                cl.kernel) * cl.kernel;
                                for (int dy = 0; dy < cl.kernel; ++dy)
                                    for (int dx = 0; dx < cl.kernel; ++dx)
                                        sum += params[wbase + static_cast<size_t>(dy) * cl.kernel + dx] *
                                               cur[static_cast<size_t>(((y + dy) * in.w + (xo + dx)) * in.c + ic)];
                            }
                            conv[static_cast<size_t>((y * cs.w + xo) * cs.c + oc)] = sum;
                        }
                    }
                }
                if (cl.maxpool) {
                    const Shape os = cl.out_shape;
                    std::vector<int> arg(static_cast<size_t>(os.size()));
                    for (int oc = 0; oc < cl.out_ch; ++oc) {
                        for (int py = 0; py < os.h; ++py) {
                            for (int px = 0; px < os.w; ++px) {
                                int best = ((2 * py) * cs.w + 2 * px) * cs.c + oc;
                                double bv = conv[static_cast<size_t>(best)];
                                for (int dy = 0; dy < 2; ++dy)
                                    for (int dx = 0; dx < 2; ++dx) {
                                        const int idx =
                                            ((2 * py + dy) * cs.w + (2 * px + dx)) * cs.c + oc;
                                        if (conv[static_cast<size_t>(idx)] > bv) {
                                            bv = conv[static_cast<size_t>(idx)];
                                            best = idx;
                                        }
                                    }
                                const size_t o = static_cast<size_t>((py * os.w + px) * os.c + oc);
                                next[o] = bv;
                                arg[o] = best;
                            }
                        }
                    }
                    if (acts) {
                        (*pre_pool)[li] = std::move(conv);
                        (*pool_arg)[li] = std::move(arg);
                    }
                } else {
                    next = std::move(conv);
                }
                break;
            }
            case Kind::dense:
            case Kind::softmax: {
                for (int o = 0; o < cl.out_size; ++o) {
                    double sum = params[cl.b_off + static_cast<size_t>(o)];
                    const size_t wbase = cl.w_off + static_cast<size_t>(o) * cl.in_size;
                    for (int i = 0; i < cl.in_size; ++i) sum += params[wbase + static_cast<size_t>(i)] * cur[static_cast<size_t>(i)];
                    next[static_cast<size_t>(o)] = sum;
                }
                if (cl.kind == Kind::softmax) softmax_inplace(next);
                break;
            }
            case Kind::relu: {
                for (int i = 0; i < cl.in_size; ++i) next[static_cast<size_t>(i)] = std::max(0.0, cur[static_cast<size_t>(i)]);
                break;
            }
        }
        cur = std::move(next);
        if (acts) acts->push_back(cur);
    }
    return cur;
}

std::vector<double> Network::forward(const ParamVector& params, std::span<const double> x) const {
    return run_forward(params, x, nullptr, nullptr, nullptr);
}

double Network::backward(const ParamVector& params, std::span<const double> x, int label,
                         ParamVector* param_grad, std::vector<double>* input_grad,
                         double scale) const {
    if (label < 0 || label >= num_classes_)
        throw std::invalid_argument("model: label out of range");
    if (param_grad && param_grad->size() != param_count_)
        throw std::invalid_argument("model: gradient accumulator length mismatch");

    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> pre_pool;
    std::vector<std::vector<int>> pool_arg;
    std::vector<double> probs = run_forward(params, x, &acts, &pre_pool, &pool_arg);

    const double p = std::max(probs[static_cast<size_t>(label)], 1e-300);
    const double loss = -std::log(p);

    // softmax + cross-entropy fused gradient
    std::vector<double> delta = probs;
    delta[static_cast<size_t>(label)] -= 1.0;

    for (size_t li = layers_.size(); li-- > 0;) {
        const Compiled& cl = layers_[li];
        const std::vector<double>& in = acts[li];
        std::vector<double> din(static_cast<size_t>(cl.in_size), 0.0);
        switch (cl.kind) {
            case Kind::softmax:
            case Kind::dense: {
                for (int o = 0; o < cl.out_size; ++o) {
                    const double d = delta[static_cast<size_t>(o)];
                    if (d == 0.0) continue;
                    const size_t wbase = cl.w_off + static_cast<size_t>(o) * cl.in_size;
                    if (param_grad) {
                        (*param_grad)[cl.b_off + static_cast<size_t>(o)] += scale * d;
                        for (int i = 0; i < cl.in_size; ++i)
                            (*param_grad)[wbase + static_cast<size_t>(i)] += scale * d * in[static_cast<size_t>(i)];
                    }
                    for (int i = 0; i < cl.in_size; ++i)
                        din[static_cast<size_t>(i)] += d * params[wbase + static_cast<size_t>(i)];
                }
                break;
            }
            case Kind::relu: {
                for (int i = 0; i < cl.in_size; ++i)
                    din[static_cast<size_t>(i)] = in[static_cast<size_t>(i)] > 0 ? delta[static_cast<size_t>(i)] : 0.0;
                break;
            }
            case Kind::conv: {
                const Shape ins = cl.in_shape;
                const Shape cs = cl.conv_shape;
                std::vector<double> dconv;
                if (cl.maxpool) {
                    dconv.assign(static_cast<size_t>(cs.size()), 0.0);
                    const auto& arg = pool_arg[li];
                    for (size_t o = 0; o < arg.size(); ++o)
                        dconv[static_cast<size_t>(arg[o])] += delta[o];
                } else {
                    dconv = std::move(delta);
                }
                for (int oc = 0; oc < cl.out_ch; ++oc) {
                    for (int y = 0; y < cs.h; ++y) {
                        for (int xo = 0; xo < cs.w; ++xo) {
                            const double d = dconv[static_cast<size_t>((y * cs.w + xo) * cs.c + oc)];
                            if (d == 0.0) continue;
                            if (param_grad)
                                (*param_grad)[cl.b_off + static_cast<size_t>(oc)] += scale * d;
                            for (int ic = 0; ic < cl.in_ch; ++ic) {
                                const size_t wbase =
                                    cl.w_off + ((static_cast<size_t>(oc) * cl.in_ch + ic) *
                                                cl.kernel) * cl.kernel;
                                for (int dy = 0; dy < cl.kernel; ++dy) {
                                    for (int dx = 0; dx < cl.kernel; ++dx) {
                                        const size_t ii = static_cast<size_t>(
                                            ((y + dy) * ins.w + (xo + dx)) * ins.c + ic);
                                        const size_t wi = wbase + static_cast<size_t>(dy) * cl.kernel + dx;
                                        if (param_grad) (*param_grad)[wi] += scale * d * in[ii];
                                        din[ii] += d * params[wi];
                                    }
                                }
                            }
                        }
                    }
                }
                break;
            }
        }
        delta = std::move(din);
    }
    if (input_grad) *input_grad = std::move(delta);
    return loss;
}

}  // namespace hfl
