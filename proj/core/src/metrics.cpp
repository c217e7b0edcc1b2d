#include "hfl/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "hfl/learner.hpp"

namespace hfl {

double ForwardModel::loss(std::span<const double> x, int label) const {
    const std::vector<double> probs = predict(x);
    return -std::log(std::max(probs.at(static_cast<size_t>(label)), 1e-300));
}

std::vector<double> NetworkModel::input_gradient(std::span<const double> x, int label) const {
    return input_grad(*net_, *params_, x, label);
}

int predict_class(const ForwardModel& model, std::span<const double> x) {
    const std::vector<double> probs = model.predict(x);
    int best = 0;
    for (size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[static_cast<size_t>(best)]) best = static_cast<int>(i);
    return best;
}

double misclassification_rate(const ForwardModel& model, const Dataset& eval) {
    if (eval.empty()) throw std::invalid_argument("misclassification_rate: empty evaluation set");
    size_t wrong = 0;
    for (const Example& e : eval.examples)
        if (predict_class(model, e.pixels) != e.label) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(eval.size());
}

double tasr(const ForwardModel& model, const Dataset& adversarial, int target_label) {
    if (adversarial.empty()) throw std::invalid_argument("tasr: empty adversarial set");
    size_t hits = 0, considered = 0;
    for (const Example& e : adversarial.examples) {
        if (e.label == target_label) continue;  // only true label != target counts
        ++considered;
        if (predict_class(model, e.pixels) == target_label) ++hits;
    }
    if (considered == 0)
        throw std::invalid_argument("tasr: every example's true label equals the target");
    return static_cast<double>(hits) / static_cast<double>(considered);
}

}  // namespace hfl
