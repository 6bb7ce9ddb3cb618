#ifndef DRE_TRAIN_HPP
#define DRE_TRAIN_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dre/gaussian.hpp"
#include "dre/losses.hpp"
#include "dre/mlp.hpp"
#include "dre/optimizer.hpp"

namespace dre {

struct TrainConfig {
    LossKind loss = LossKind::alpha_div(0.5);
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    int batch_size = 2500;
    int epochs = 250;
    std::uint64_t seed = 0;
    bool shuffle = true;
};

/// Per-step loss values plus epoch-level summaries. epoch_loss is the
/// full-batch loss over the training sets at each epoch end (train() takes
/// no holdout; use validate() for held-out evaluation). epoch_seconds is
/// wall-clock and is excluded from the deterministic output contract.
struct TrainTrace {
    std::vector<double> step_loss;
    std::vector<double> epoch_loss;
    std::vector<double> epoch_seconds;
    long clamp_events = 0;
    int steps() const { return static_cast<int>(step_loss.size()); }
};

/// Thrown when a training step produces a non-finite loss or gradient.
/// Carries the step index, clamp statistics, and the partial trace.
struct TrainAbort : std::runtime_error {
    int step_index;
    long clamp_events;
    TrainTrace partial;

    TrainAbort(int step, long clamps, TrainTrace trace)
        : std::runtime_error("training aborted at step " + std::to_string(step) +
                             " (non-finite loss; " + std::to_string(clamps) +
                             " exponent clamps so far)"),
          step_index(step),
          clamp_events(clamps),
          partial(std::move(trace)) {}
};

/// Trained energy network plus the scaler making mean predicted ratio on
/// the reference P sample exactly 1: r_hat(x) = exp(-T(x)) / normalizer.
struct RatioModel {
    MlpModel network;
    double normalizer = 1.0;
    int reference_size = 0;
};

/// normalizer = mean_p exp(-T(x)); errors out if every exponent saturated
/// the clamp (the reference pushed the network outside representable range).
inline RatioModel normalize(const MlpModel& network, const SampleSet& reference_p) {
    if (reference_p.size() < 1) throw std::invalid_argument("normalize: empty reference sample");
    const std::vector<double> t = mlp_forward(network, reference_p.data);
    long clamps = 0;
    double sum = 0.0;
    for (double ti : t) sum += clamped_exp(-ti, clamps);
    if (clamps == static_cast<long>(t.size()))
        throw std::runtime_error("normalize: all " + std::to_string(t.size()) +
                                 " reference exponents saturated at the clamp bound");
    RatioModel model;
    model.network = network;
    model.normalizer = sum / static_cast<double>(t.size());
    model.reference_size = reference_p.size();
    return model;
}

inline std::vector<double> predict_ratio(const RatioModel& model, const Matrix& x) {
    if (x.cols != model.network.input_dim())
        throw std::invalid_argument("predict_ratio: input dimension mismatch");
    const std::vector<double> t = mlp_forward(model.network, x);
    std::vector<double> r(t.size());
    long clamps = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        r[i] = clamped_exp(-t[i], clamps) / model.normalizer;
    return r;
}

inline double predict_ratio_one(const RatioModel& model, std::span<const double> x) {
    Matrix batch(1, static_cast<int>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) batch(0, j) = x[j];
    return predict_ratio(model, batch)[0];
}

/// Held-out alpha-divergence loss of the unnormalized network.
inline double validate(const RatioModel& model, const SampleSet& holdout_p,
                       const SampleSet& holdout_q, double alpha) {
    if (holdout_p.size() < 1 || holdout_q.size() < 1)
        throw std::invalid_argument("validate: empty holdout sample");
    const std::vector<double> t_p = mlp_forward(model.network, holdout_p.data);
    const std::vector<double> t_q = mlp_forward(model.network, holdout_q.data);
    return alpha_div_loss(t_q, t_p, alpha).value;
}

namespace detail {

/// Cycling minibatch source over one sample set: hands out index blocks,
/// re-shuffling each time the set is exhausted.
class BatchCycler {
public:
    BatchCycler(int n, bool shuffle, Rng* rng) : order_(n), shuffle_(shuffle), rng_(rng) {
        std::iota(order_.begin(), order_.end(), 0);
        if (shuffle_) rng_->shuffle(order_);
    }

    std::vector<int> next(int count) {
        std::vector<int> idx;
        idx.reserve(count);
        for (int k = 0; k < count; ++k) {
            if (pos_ == static_cast<int>(order_.size())) {
                pos_ = 0;
                if (shuffle_) rng_->shuffle(order_);
            }
            idx.push_back(order_[pos_++]);
        }
        return idx;
    }

private:
    std::vector<int> order_;
    int pos_ = 0;
    bool shuffle_;
    Rng* rng_;
};

inline Matrix gather_rows(const Matrix& data, const std::vector<int>& idx) {
    Matrix out(static_cast<int>(idx.size()), data.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto src = data.row(idx[i]);
        auto dst = out.row(static_cast<int>(i));
        for (int j = 0; j < data.cols; ++j) dst[j] = src[j];
    }
    return out;
}

}  // namespace detail

/// Minibatch training of the energy network. Each step pairs one
/// P-minibatch with one Q-minibatch of the same nominal size; an epoch is
/// one pass over the larger sample set, the smaller one cycling with
/// re-shuffles. A batch size above a set's size falls back to the full set.
/// Deterministic for a fixed (data, arch, config) tuple.
inline std::pair<RatioModel, TrainTrace> train(const SampleSet& data_p, const SampleSet& data_q,
                                               const std::vector<int>& arch,
                                               const TrainConfig& config) {
    if (data_p.size() < 1 || data_q.size() < 1)
        throw std::invalid_argument("train: empty sample set");
    if (data_p.dim() != data_q.dim())
        throw std::invalid_argument("train: P and Q dimension mismatch");
    if (arch.front() != data_p.dim())
        throw std::invalid_argument("train: arch input size " + std::to_string(arch.front()) +
                                    " does not match data dimension " +
                                    std::to_string(data_p.dim()));
    if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (config.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");

    MlpModel model = mlp_init(arch, derive_seed(config.seed, 0));
    OptimizerState opt = optimizer_init(config.optimizer, config.learning_rate, model);
    Rng shuffle_rng(config.seed, 1);

    const int n_p = data_p.size();
    const int n_q = data_q.size();
    const int larger = std::max(n_p, n_q);
    const int steps_per_epoch = (larger + config.batch_size - 1) / config.batch_size;
    const int batch_p = std::min(config.batch_size, n_p);
    const int batch_q = std::min(config.batch_size, n_q);

    detail::BatchCycler cycler_p(n_p, config.shuffle, &shuffle_rng);
    detail::BatchCycler cycler_q(n_q, config.shuffle, &shuffle_rng);

    TrainTrace trace;
    trace.step_loss.reserve(static_cast<std::size_t>(config.epochs) * steps_per_epoch);
    int step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        for (int s = 0; s < steps_per_epoch; ++s, ++step) {
            const Matrix bp = detail::gather_rows(data_p.data, cycler_p.next(batch_p));
            const Matrix bq = detail::gather_rows(data_q.data, cycler_q.next(batch_q));
            NetworkLossEval eval;
            try {
                eval = network_loss_eval(model, bq, bp, config.loss);
            } catch (const std::invalid_argument&) {
                throw TrainAbort(step, trace.clamp_events, trace);
            }
            trace.clamp_events += eval.loss.clamp_events;
            if (!std::isfinite(eval.loss.value))
                throw TrainAbort(step, trace.clamp_events, trace);
            trace.step_loss.push_back(eval.loss.value);
            try {
                optimizer_step(opt, model, eval.grads);
            } catch (const std::runtime_error&) {
                throw TrainAbort(step, trace.clamp_events, trace);
            }
        }
        const std::vector<double> t_p = mlp_forward(model, data_p.data);
        const std::vector<double> t_q = mlp_forward(model, data_q.data);
        LossValue full;
        if (config.loss.tag == LossTag::AlphaDiv) {
            full = alpha_div_loss(t_q, t_p, config.loss.alpha);
        } else {
            long clamps = 0;
            std::vector<double> phi_q(t_q.size()), phi_p(t_p.size());
            for (std::size_t i = 0; i < t_q.size(); ++i) phi_q[i] = clamped_exp(-t_q[i], clamps);
            for (std::size_t j = 0; j < t_p.size(); ++j) phi_p[j] = clamped_exp(-t_p[j], clamps);
            full = f_div_loss(config.loss, phi_q, phi_p);
        }
        trace.epoch_loss.push_back(full.value);
        trace.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
                .count());
    }

    return {normalize(model, data_p), std::move(trace)};
}

}  // namespace dre

#endif
