#ifndef DRE_LOSSES_HPP
#define DRE_LOSSES_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dre/mlp.hpp"

namespace dre {

enum class LossTag { Kl, ReverseKl, PearsonChi2, SquaredHellinger, Gan, AlphaDiv };

/// Loss family selector. AlphaDiv carries its alpha, which must avoid
/// {0, 1} where the alpha-divergence is undefined.
struct LossKind {
    LossTag tag = LossTag::AlphaDiv;
    double alpha = 0.5;

    static LossKind alpha_div(double a) { return {LossTag::AlphaDiv, a}; }
    static LossKind kl() { return {LossTag::Kl, 0.0}; }
    static LossKind reverse_kl() { return {LossTag::ReverseKl, 0.0}; }
    static LossKind pearson_chi2() { return {LossTag::PearsonChi2, 0.0}; }
    static LossKind squared_hellinger() { return {LossTag::SquaredHellinger, 0.0}; }
    static LossKind gan() { return {LossTag::Gan, 0.0}; }
};

inline const char* loss_tag_name(LossTag tag) {
    switch (tag) {
        case LossTag::Kl: return "kl";
        case LossTag::ReverseKl: return "reverse-kl";
        case LossTag::PearsonChi2: return "pearson-chi2";
        case LossTag::SquaredHellinger: return "squared-hellinger";
        case LossTag::Gan: return "gan";
        case LossTag::AlphaDiv: return "alpha-div";
    }
    return "?";
}

/// value = q_term + p_term (+ the fixed constant of the loss family, for
/// families that carry one). clamp_events counts exponent saturations.
struct LossValue {
    double value = 0.0;
    double q_term = 0.0;
    double p_term = 0.0;
    long clamp_events = 0;
};

/// Exponent clamp bound. Caps magnitude before exponentiation so the loss
/// stays finite, but never substitutes a sentinel: divergence to large
/// negative values remains observable.
constexpr double kExpClampBound = 700.0;

inline double clamped_exp(double x, long& clamp_events) {
    if (x > kExpClampBound) {
        ++clamp_events;
        x = kExpClampBound;
    } else if (x < -kExpClampBound) {
        ++clamp_events;
        x = -kExpClampBound;
    }
    return std::exp(x);
}

namespace detail {

inline void check_alpha(double alpha) {
    if (alpha == 0.0 || alpha == 1.0)
        throw std::invalid_argument("alpha must not be 0 or 1");
    if (!std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite");
}

inline void check_loss_inputs(std::span<const double> t_q, std::span<const double> t_p) {
    if (t_q.empty() || t_p.empty())
        throw std::invalid_argument("loss: empty sample vector");
    for (double x : t_q)
        if (!std::isfinite(x)) throw std::invalid_argument("loss: non-finite Q-side input");
    for (double x : t_p)
        if (!std::isfinite(x)) throw std::invalid_argument("loss: non-finite P-side input");
}

}  // namespace detail

/// alpha-divergence loss of network outputs T on the Q and P samples:
///   (1/alpha) mean_q exp(alpha*T) + (1/(1-alpha)) mean_p exp((alpha-1)*T).
/// For alpha in (0,1) both terms are positive, so the loss is bounded
/// below by 0 on any inputs.
inline LossValue alpha_div_loss(std::span<const double> t_q, std::span<const double> t_p,
                                double alpha) {
    detail::check_alpha(alpha);
    detail::check_loss_inputs(t_q, t_p);
    LossValue out;
    double sum_q = 0.0;
    for (double t : t_q) sum_q += clamped_exp(alpha * t, out.clamp_events);
    double sum_p = 0.0;
    for (double t : t_p) sum_p += clamped_exp((alpha - 1.0) * t, out.clamp_events);
    out.q_term = sum_q / (alpha * static_cast<double>(t_q.size()));
    out.p_term = sum_p / ((1.0 - alpha) * static_cast<double>(t_p.size()));
    out.value = out.q_term + out.p_term;
    return out;
}

/// Per-output derivatives of alpha_div_loss:
///   dL/dt_q[i] = (1/M) exp(alpha*t_q[i]),  dL/dt_p[j] = -(1/N) exp((alpha-1)*t_p[j]).
inline void alpha_div_output_grads(std::span<const double> t_q, std::span<const double> t_p,
                                   double alpha, std::vector<double>& d_t_q,
                                   std::vector<double>& d_t_p) {
    detail::check_alpha(alpha);
    detail::check_loss_inputs(t_q, t_p);
    long clamps = 0;
    const double inv_m = 1.0 / static_cast<double>(t_q.size());
    const double inv_n = 1.0 / static_cast<double>(t_p.size());
    d_t_q.resize(t_q.size());
    d_t_p.resize(t_p.size());
    for (std::size_t i = 0; i < t_q.size(); ++i)
        d_t_q[i] = inv_m * clamped_exp(alpha * t_q[i], clamps);
    for (std::size_t j = 0; j < t_p.size(); ++j)
        d_t_p[j] = -inv_n * clamped_exp((alpha - 1.0) * t_p[j], clamps);
}

namespace detail {

inline void require_positive(std::span<const double> phi, const char* side, LossTag tag) {
    for (double x : phi)
        if (!(x > 0.0))
            throw std::invalid_argument(std::string(loss_tag_name(tag)) + ": " + side +
                                        "-side phi must be strictly positive");
}

}  // namespace detail

/// f-divergence losses of the ratio-model outputs phi, pre-simplified per
/// family. The additive constants are included so every family evaluates
/// to 0 at phi == 1 under P = Q (GAN evaluates to 2 log 2).
inline LossValue f_div_loss(const LossKind& kind, std::span<const double> phi_q,
                            std::span<const double> phi_p) {
    detail::check_loss_inputs(phi_q, phi_p);
    const double m = static_cast<double>(phi_q.size());
    const double n = static_cast<double>(phi_p.size());
    LossValue out;
    switch (kind.tag) {
        case LossTag::AlphaDiv: {
            // Route through the energy parameterization T = -log(phi).
            detail::require_positive(phi_q, "Q", kind.tag);
            detail::require_positive(phi_p, "P", kind.tag);
            std::vector<double> t_q(phi_q.size()), t_p(phi_p.size());
            for (std::size_t i = 0; i < phi_q.size(); ++i) t_q[i] = -std::log(phi_q[i]);
            for (std::size_t j = 0; j < phi_p.size(); ++j) t_p[j] = -std::log(phi_p[j]);
            return alpha_div_loss(t_q, t_p, kind.alpha);
        }
        case LossTag::Kl: {
            detail::require_positive(phi_q, "Q", kind.tag);
            double sq = 0.0, sp = 0.0;
            for (double x : phi_q) sq += std::log(x);
            for (double x : phi_p) sp += x;
            out.q_term = -sq / m;
            out.p_term = sp / n;
            out.value = out.q_term + out.p_term - 1.0;
            return out;
        }
        case LossTag::ReverseKl: {
            detail::require_positive(phi_q, "Q", kind.tag);
            detail::require_positive(phi_p, "P", kind.tag);
            double sq = 0.0, sp = 0.0;
            for (double x : phi_q) sq += 1.0 / x;
            for (double x : phi_p) sp += std::log(x);
            out.q_term = sq / m;
            out.p_term = sp / n;
            out.value = out.q_term + out.p_term - 1.0;
            return out;
        }
        case LossTag::PearsonChi2: {
            double sq = 0.0, sp = 0.0;
            for (double x : phi_q) sq += x;
            for (double x : phi_p) sp += x * x;
            out.q_term = -2.0 * sq / m;
            out.p_term = sp / n;
            out.value = out.q_term + out.p_term + 1.0;
            return out;
        }
        case LossTag::SquaredHellinger: {
            detail::require_positive(phi_q, "Q", kind.tag);
            detail::require_positive(phi_p, "P", kind.tag);
            double sq = 0.0, sp = 0.0;
            for (double x : phi_q) sq += 1.0 / std::sqrt(x);
            for (double x : phi_p) sp += std::sqrt(x);
            out.q_term = sq / m;
            out.p_term = sp / n;
            out.value = out.q_term + out.p_term - 2.0;
            return out;
        }
        case LossTag::Gan: {
            detail::require_positive(phi_q, "Q", kind.tag);
            detail::require_positive(phi_p, "P", kind.tag);
            double sq = 0.0, sp = 0.0;
            for (double x : phi_q) sq += std::log(1.0 + 1.0 / x);
            for (double x : phi_p) sp += std::log(1.0 + x);
            out.q_term = sq / m;
            out.p_term = sp / n;
            out.value = out.q_term + out.p_term;
            return out;
        }
    }
    throw std::logic_error("f_div_loss: unknown loss tag");
}

/// Per-output derivatives of f_div_loss w.r.t. the phi values.
inline void f_div_output_grads(const LossKind& kind, std::span<const double> phi_q,
                               std::span<const double> phi_p, std::vector<double>& d_phi_q,
                               std::vector<double>& d_phi_p) {
    detail::check_loss_inputs(phi_q, phi_p);
    const double inv_m = 1.0 / static_cast<double>(phi_q.size());
    const double inv_n = 1.0 / static_cast<double>(phi_p.size());
    d_phi_q.resize(phi_q.size());
    d_phi_p.resize(phi_p.size());
    switch (kind.tag) {
        case LossTag::AlphaDiv: {
            detail::require_positive(phi_q, "Q", kind.tag);
            detail::require_positive(phi_p, "P", kind.tag);
            std::vector<double> t_q(phi_q.size()), t_p(phi_p.size());
            for (std::size_t i = 0; i < phi_q.size(); ++i) t_q[i] = -std::log(phi_q[i]);
            for (std::size_t j = 0; j < phi_p.size(); ++j) t_p[j] = -std::log(phi_p[j]);
            std::vector<double> d_t_q, d_t_p;
            alpha_div_output_grads(t_q, t_p, kind.alpha, d_t_q, d_t_p);
            for (std::size_t i = 0; i < phi_q.size(); ++i) d_phi_q[i] = -d_t_q[i] / phi_q[i];
            for (std::size_t j = 0; j < phi_p.size(); ++j) d_phi_p[j] = -d_t_p[j] / phi_p[j];
            return;
        }
        case LossTag::Kl:
            detail::require_positive(phi_q, "Q", kind.tag);
            for (std::size_t i = 0; i < phi_q.size(); ++i) d_phi_q[i] = -inv_m / phi_q[i];
            for (std::size_t j = 0; j < phi_p.size(); ++j) d_phi_p[j] = inv_n;
            return;
        case LossTag::ReverseKl:
            detail::require_positive(phi_q, "Q", kind.tag);
            detail::require_positive(phi_p, "P", kind.tag);
            for (std::size_t i = 0; i < phi_q.size(); ++i)
                d_phi_q[i] = -inv_m / (phi_q[i] * phi_q[i]);
            for (std::size_t j = 0; j < phi_p.size(); ++j) d_phi_p[j] = inv_n / phi_p[j];
            return;
        case LossTag::PearsonChi2:
            for (std::size_t i = 0; i < phi_q.size(); ++i) d_phi_q[i] = -2.0 * inv_m;
            for (std::size_t j = 0; j < phi_p.size(); ++j) d_phi_p[j] = 2.0 * inv_n * phi_p[j];
            return;
        case LossTag::SquaredHellinger:
            detail::require_positive(phi_q, "Q", kind.tag);
            detail::require_positive(phi_p, "P", kind.tag);
            for (std::size_t i = 0; i < phi_q.size(); ++i)
                d_phi_q[i] = -0.5 * inv_m * std::pow(phi_q[i], -1.5);
            for (std::size_t j = 0; j < phi_p.size(); ++j)
                d_phi_p[j] = 0.5 * inv_n / std::sqrt(phi_p[j]);
            return;
        case LossTag::Gan:
            detail::require_positive(phi_q, "Q", kind.tag);
            detail::require_positive(phi_p, "P", kind.tag);
            for (std::size_t i = 0; i < phi_q.size(); ++i)
                d_phi_q[i] = -inv_m / (phi_q[i] * (1.0 + phi_q[i]));
            for (std::size_t j = 0; j < phi_p.size(); ++j) d_phi_p[j] = inv_n / (1.0 + phi_p[j]);
            return;
    }
    throw std::logic_error("f_div_output_grads: unknown loss tag");
}

/// Loss and full parameter gradient of a network on one (Q, P) batch pair.
/// For the phi-parameterized families the network output T is mapped
/// through phi = exp(-T), which keeps phi strictly positive.
struct NetworkLossEval {
    LossValue loss;
    ParamGrads grads;
};

inline NetworkLossEval network_loss_eval(const MlpModel& model, const Matrix& batch_q,
                                         const Matrix& batch_p, const LossKind& kind) {
    const std::vector<double> t_q = mlp_forward(model, batch_q);
    const std::vector<double> t_p = mlp_forward(model, batch_p);
    NetworkLossEval out;
    std::vector<double> d_t_q, d_t_p;
    if (kind.tag == LossTag::AlphaDiv) {
        out.loss = alpha_div_loss(t_q, t_p, kind.alpha);
        alpha_div_output_grads(t_q, t_p, kind.alpha, d_t_q, d_t_p);
    } else {
        long clamps = 0;
        std::vector<double> phi_q(t_q.size()), phi_p(t_p.size());
        for (std::size_t i = 0; i < t_q.size(); ++i) phi_q[i] = clamped_exp(-t_q[i], clamps);
        for (std::size_t j = 0; j < t_p.size(); ++j) phi_p[j] = clamped_exp(-t_p[j], clamps);
        out.loss = f_div_loss(kind, phi_q, phi_p);
        out.loss.clamp_events += clamps;
        std::vector<double> d_phi_q, d_phi_p;
        f_div_output_grads(kind, phi_q, phi_p, d_phi_q, d_phi_p);
        d_t_q.resize(t_q.size());
        d_t_p.resize(t_p.size());
        for (std::size_t i = 0; i < t_q.size(); ++i) d_t_q[i] = -d_phi_q[i] * phi_q[i];
        for (std::size_t j = 0; j < t_p.size(); ++j) d_t_p[j] = -d_phi_p[j] * phi_p[j];
    }
    out.grads = mlp_backward(model, batch_q, d_t_q);
    accumulate(out.grads, mlp_backward(model, batch_p, d_t_p));
    return out;
}

enum class Regime { VanishesToZero, DivergesNegative, DivergesPositive, Indeterminate };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::VanishesToZero: return "vanishes-to-zero";
        case Regime::DivergesNegative: return "diverges-negative";
        case Regime::DivergesPositive: return "diverges-positive";
        case Regime::Indeterminate: return "indeterminate";
    }
    return "?";
}

/// Diagnostic for the gradient regimes of the alpha-divergence loss when
/// the network output sits at an extreme level t_const. Thresholds:
/// vanishing below 1e-6, divergence above 1e3 with the sign of the
/// dominant side (Q-side exponential enters positively, P-side negatively).
struct RegimeReport {
    double grad_norm = 0.0;
    Regime classification = Regime::Indeterminate;
    double q_side_scale = 0.0;  // mean exp(alpha * T)
    double p_side_scale = 0.0;  // mean exp((alpha-1) * T)
};

inline RegimeReport gradient_regime_probe(double alpha, double t_const, const MlpModel& model,
                                          const Matrix& batch_p, const Matrix& batch_q) {
    detail::check_alpha(alpha);
    MlpModel shifted = model;
    shifted.biases.back()[0] += t_const;

    const auto eval = network_loss_eval(shifted, batch_q, batch_p, LossKind::alpha_div(alpha));
    RegimeReport report;
    report.grad_norm = grad_norm(eval.grads);
    report.q_side_scale = eval.loss.q_term * alpha;
    report.p_side_scale = eval.loss.p_term * (1.0 - alpha);

    if (report.grad_norm < 1e-6) {
        report.classification = Regime::VanishesToZero;
    } else if (report.grad_norm > 1e3) {
        report.classification = report.p_side_scale > report.q_side_scale
                                    ? Regime::DivergesNegative
                                    : Regime::DivergesPositive;
    }
    return report;
}

}  // namespace dre

#endif
