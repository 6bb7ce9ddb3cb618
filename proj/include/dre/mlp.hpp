#ifndef DRE_MLP_HPP
#define DRE_MLP_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dre/linalg.hpp"
#include "dre/rng.hpp"

namespace dre {

/// Feed-forward perceptron: ReLU hidden layers, linear scalar output.
/// weights[l] has shape layer_sizes[l+1] x layer_sizes[l], biases[l] has
/// length layer_sizes[l+1].
struct MlpModel {
    std::vector<int> layer_sizes;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    int input_dim() const { return layer_sizes.front(); }
    int num_layers() const { return static_cast<int>(weights.size()); }
};

/// Gradients with the same shape as the model parameters.
struct ParamGrads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

inline ParamGrads zero_grads_like(const MlpModel& model) {
    ParamGrads g;
    g.weights.reserve(model.weights.size());
    g.biases.reserve(model.biases.size());
    for (const auto& w : model.weights) g.weights.emplace_back(w.rows, w.cols);
    for (const auto& b : model.biases) g.biases.emplace_back(b.size(), 0.0);
    return g;
}

inline void accumulate(ParamGrads& into, const ParamGrads& from) {
    for (std::size_t l = 0; l < into.weights.size(); ++l) {
        for (std::size_t i = 0; i < into.weights[l].data.size(); ++i)
            into.weights[l].data[i] += from.weights[l].data[i];
        for (std::size_t i = 0; i < into.biases[l].size(); ++i)
            into.biases[l][i] += from.biases[l][i];
    }
}

inline void scale(ParamGrads& g, double factor) {
    for (auto& w : g.weights)
        for (double& x : w.data) x *= factor;
    for (auto& b : g.biases)
        for (double& x : b) x *= factor;
}

inline double grad_norm(const ParamGrads& g) {
    double s = 0.0;
    for (const auto& w : g.weights)
        for (double x : w.data) s += x * x;
    for (const auto& b : g.biases)
        for (double x : b) s += x * x;
    return std::sqrt(s);
}

/// He-style uniform init on +-sqrt(6/fan_in), biases zero. Deterministic
/// for a fixed (layer_sizes, seed) pair.
inline MlpModel mlp_init(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("mlp_init: need at least input and output sizes");
    for (int s : layer_sizes)
        if (s <= 0) throw std::invalid_argument("mlp_init: layer sizes must be positive");
    if (layer_sizes.back() != 1)
        throw std::invalid_argument("mlp_init: output layer size must be 1");

    MlpModel model;
    model.layer_sizes = layer_sizes;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / fan_in);
        Matrix w(fan_out, fan_in);
        for (double& x : w.data) x = rng.uniform(-bound, bound);
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(fan_out, 0.0);
    }
    return model;
}

namespace detail {

inline void check_batch(const MlpModel& model, const Matrix& batch) {
    if (batch.cols != model.input_dim())
        throw std::invalid_argument("mlp: batch width " + std::to_string(batch.cols) +
                                    " does not match input dim " +
                                    std::to_string(model.input_dim()));
}

/// Forward pass keeping post-activation values of every layer.
/// acts[0] is the input batch; acts[L] holds the scalar outputs (n x 1).
inline std::vector<Matrix> forward_cached(const MlpModel& model, const Matrix& batch) {
    check_batch(model, batch);
    const int n = batch.rows;
    std::vector<Matrix> acts;
    acts.reserve(model.num_layers() + 1);
    acts.push_back(batch);
    for (int l = 0; l < model.num_layers(); ++l) {
        const Matrix& w = model.weights[l];
        const auto& b = model.biases[l];
        const Matrix& in = acts.back();
        Matrix out(n, w.rows);
        const bool last = (l == model.num_layers() - 1);
        for (int i = 0; i < n; ++i) {
            const auto xi = in.row(i);
            for (int j = 0; j < w.rows; ++j) {
                double z = b[j] + dot(w.row(j), xi);
                if (!last && z < 0.0) z = 0.0;  // ReLU; derivative at 0 taken as 0
                out(i, j) = z;
            }
        }
        acts.push_back(std::move(out));
    }
    return acts;
}

}  // namespace detail

/// Network outputs T(x) for each row of the batch.
inline std::vector<double> mlp_forward(const MlpModel& model, const Matrix& batch) {
    const auto acts = detail::forward_cached(model, batch);
    const Matrix& out = acts.back();
    std::vector<double> t(out.rows);
    for (int i = 0; i < out.rows; ++i) t[i] = out(i, 0);
    return t;
}

inline double mlp_forward_one(const MlpModel& model, std::span<const double> x) {
    Matrix batch(1, static_cast<int>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) batch(0, j) = x[j];
    return mlp_forward(model, batch)[0];
}

/// Exact reverse-mode gradient of sum_i upstream[i] * T(x_i) w.r.t. all
/// parameters.
inline ParamGrads mlp_backward(const MlpModel& model, const Matrix& batch,
                               std::span<const double> upstream) {
    detail::check_batch(model, batch);
    if (static_cast<int>(upstream.size()) != batch.rows)
        throw std::invalid_argument("mlp_backward: upstream length does not match batch rows");

    const auto acts = detail::forward_cached(model, batch);
    const int n = batch.rows;
    const int num_layers = model.num_layers();
    ParamGrads grads = zero_grads_like(model);

    // delta holds dL/d(pre-activation) of the current layer, n x width.
    Matrix delta(n, 1);
    for (int i = 0; i < n; ++i) delta(i, 0) = upstream[i];

    for (int l = num_layers - 1; l >= 0; --l) {
        const Matrix& in = acts[l];
        Matrix& dw = grads.weights[l];
        auto& db = grads.biases[l];
        for (int i = 0; i < n; ++i) {
            const auto xi = in.row(i);
            for (int j = 0; j < dw.rows; ++j) {
                const double d = delta(i, j);
                if (d == 0.0) continue;
                db[j] += d;
                auto wj = dw.row(j);
                for (int k = 0; k < dw.cols; ++k) wj[k] += d * xi[k];
            }
        }
        if (l == 0) break;
        const Matrix& w = model.weights[l];
        Matrix prev(n, w.cols);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < w.rows; ++j) {
                const double d = delta(i, j);
                if (d == 0.0) continue;
                const auto wj = w.row(j);
                auto pi = prev.row(i);
                for (int k = 0; k < w.cols; ++k) pi[k] += d * wj[k];
            }
            // ReLU mask of the producing layer (post-activation > 0).
            for (int k = 0; k < w.cols; ++k)
                if (acts[l](i, k) <= 0.0) prev(i, k) = 0.0;
        }
        delta = std::move(prev);
    }
    return grads;
}

}  // namespace dre

#endif
