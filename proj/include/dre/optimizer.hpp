#ifndef DRE_OPTIMIZER_HPP
#define DRE_OPTIMIZER_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include "dre/mlp.hpp"

namespace dre {

enum class OptimizerKind { Sgd, Adam };

/// SGD or bias-corrected Adam over MLP parameters. Adam defaults match the
/// usual framework constants.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    ParamGrads first_moment;
    ParamGrads second_moment;
    long step_count = 0;
};

inline OptimizerState optimizer_init(OptimizerKind kind, double learning_rate,
                                     const MlpModel& model) {
    if (learning_rate <= 0.0) throw std::invalid_argument("optimizer: learning_rate must be > 0");
    OptimizerState state;
    state.kind = kind;
    state.learning_rate = learning_rate;
    if (kind == OptimizerKind::Adam) {
        state.first_moment = zero_grads_like(model);
        state.second_moment = zero_grads_like(model);
    }
    return state;
}

namespace detail {

inline void check_finite_grads(const ParamGrads& grads) {
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        for (double x : grads.weights[l].data)
            if (!std::isfinite(x))
                throw std::runtime_error("optimizer: non-finite weight gradient in layer " +
                                         std::to_string(l));
        for (double x : grads.biases[l])
            if (!std::isfinite(x))
                throw std::runtime_error("optimizer: non-finite bias gradient in layer " +
                                         std::to_string(l));
    }
}

}  // namespace detail

/// One update step; mutates model and state. Rejects non-finite gradients.
inline void optimizer_step(OptimizerState& state, MlpModel& model, const ParamGrads& grads) {
    if (grads.weights.size() != model.weights.size())
        throw std::invalid_argument("optimizer_step: gradient shape mismatch");
    detail::check_finite_grads(grads);
    state.step_count += 1;

    if (state.kind == OptimizerKind::Sgd) {
        const double lr = state.learning_rate;
        for (std::size_t l = 0; l < model.weights.size(); ++l) {
            for (std::size_t i = 0; i < model.weights[l].data.size(); ++i)
                model.weights[l].data[i] -= lr * grads.weights[l].data[i];
            for (std::size_t i = 0; i < model.biases[l].size(); ++i)
                model.biases[l][i] -= lr * grads.biases[l][i];
        }
        return;
    }

    const double b1 = state.adam_beta1;
    const double b2 = state.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    const double lr = state.learning_rate;
    const double eps = state.adam_eps;

    auto update = [&](double& theta, double& m, double& v, double g) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        const double m_hat = m / corr1;
        const double v_hat = v / corr2;
        theta -= lr * m_hat / (std::sqrt(v_hat) + eps);
    };

    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        auto& w = model.weights[l].data;
        auto& mw = state.first_moment.weights[l].data;
        auto& vw = state.second_moment.weights[l].data;
        for (std::size_t i = 0; i < w.size(); ++i) update(w[i], mw[i], vw[i], grads.weights[l].data[i]);

        auto& b = model.biases[l];
        auto& mb = state.first_moment.biases[l];
        auto& vb = state.second_moment.biases[l];
        for (std::size_t i = 0; i < b.size(); ++i) update(b[i], mb[i], vb[i], grads.biases[l][i]);
    }
}

}  // namespace dre

#endif
