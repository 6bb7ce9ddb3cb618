#ifndef DRE_TEST_UTIL_HPP
#define DRE_TEST_UTIL_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "dre/mlp.hpp"

namespace dre::testing {

/// Central finite difference of a scalar function of the model parameters.
/// Independent oracle for every backprop path in the suite.
inline ParamGrads finite_difference_grads(MlpModel model,
                                          const std::function<double(const MlpModel&)>& f,
                                          double h = 1e-5) {
    ParamGrads grads = zero_grads_like(model);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        for (std::size_t i = 0; i < model.weights[l].data.size(); ++i) {
            double& theta = model.weights[l].data[i];
            const double saved = theta;
            theta = saved + h;
            const double up = f(model);
            theta = saved - h;
            const double down = f(model);
            theta = saved;
            grads.weights[l].data[i] = (up - down) / (2.0 * h);
        }
        for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
            double& theta = model.biases[l][i];
            const double saved = theta;
            theta = saved + h;
            const double up = f(model);
            theta = saved - h;
            const double down = f(model);
            theta = saved;
            grads.biases[l][i] = (up - down) / (2.0 * h);
        }
    }
    return grads;
}

/// Worst relative disagreement between two gradient sets. Differences below
/// 5e-9 count as zero: that is the noise floor of the central difference
/// itself (roundoff eps*|f|/h plus the h^2 truncation term).
inline double max_grad_rel_error(const ParamGrads& a, const ParamGrads& b) {
    double worst = 0.0;
    auto compare = [&](double x, double y) {
        const double diff = std::abs(x - y);
        if (diff <= 5e-9) return;
        worst = std::max(worst, diff / std::max(std::abs(x), std::abs(y)));
    };
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        for (std::size_t i = 0; i < a.weights[l].data.size(); ++i)
            compare(a.weights[l].data[i], b.weights[l].data[i]);
        for (std::size_t i = 0; i < a.biases[l].size(); ++i)
            compare(a.biases[l][i], b.biases[l][i]);
    }
    return worst;
}

inline Matrix random_batch(int n, int d, Rng& rng, double scale = 1.0) {
    Matrix batch(n, d);
    for (double& x : batch.data) x = scale * rng.normal();
    return batch;
}

}  // namespace dre::testing

#endif
