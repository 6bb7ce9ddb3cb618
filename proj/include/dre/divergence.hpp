#ifndef DRE_DIVERGENCE_HPP
#define DRE_DIVERGENCE_HPP

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "dre/losses.hpp"

namespace dre {

/// Plug-in divergence estimate from critic outputs on the two samples.
///
/// sigma_sq_moment is the asymptotic variance in moment form,
/// Var[L_Q] + Var[L_P]: the empirical variance of exp(alpha*T)/alpha over
/// the Q sample plus that of exp((alpha-1)*T)/(1-alpha) over the P sample.
/// sigma_sq_paper is the published constant-form expression, reported for
/// side-by-side comparison; the two are NOT expected to agree (the moment
/// form is the one that matches simulation), and the constant form is
/// singular at alpha = 0.5, where it is reported as NaN.
struct DivergenceEstimate {
    double alpha = 0.5;
    double d_hat = 0.0;
    double sigma_sq_moment = 0.0;
    double sigma_sq_paper = std::numeric_limits<double>::quiet_NaN();
    long n = 0;
};

namespace detail {

/// Plug-in divergence of order s from P-side ratio moments:
/// D_s = (E_P[r^(1-s)] - 1) / (s(s-1)), with r = exp(-T).
inline double plug_in_divergence(std::span<const double> t_p, double s, long& clamps) {
    double acc = 0.0;
    for (double t : t_p) acc += clamped_exp(-(1.0 - s) * t, clamps);
    const double moment = acc / static_cast<double>(t_p.size());
    return (moment - 1.0) / (s * (s - 1.0));
}

}  // namespace detail

/// Estimator of D_alpha(Q||P): d_hat = 1/(alpha(1-alpha)) - observed loss.
/// For alpha in (0,1) the loss is nonnegative, so d_hat never exceeds the
/// 1/(alpha(1-alpha)) bound.
inline DivergenceEstimate estimate_divergence(std::span<const double> t_q,
                                              std::span<const double> t_p, double alpha) {
    const LossValue loss = alpha_div_loss(t_q, t_p, alpha);

    DivergenceEstimate est;
    est.alpha = alpha;
    est.n = static_cast<long>(std::min(t_q.size(), t_p.size()));
    est.d_hat = 1.0 / (alpha * (1.0 - alpha)) - loss.value;

    long clamps = 0;
    std::vector<double> l_q(t_q.size()), l_p(t_p.size());
    for (std::size_t i = 0; i < t_q.size(); ++i)
        l_q[i] = clamped_exp(alpha * t_q[i], clamps) / alpha;
    for (std::size_t j = 0; j < t_p.size(); ++j)
        l_p[j] = clamped_exp((alpha - 1.0) * t_p[j], clamps) / (1.0 - alpha);
    est.sigma_sq_moment = variance(l_q) + variance(l_p);

    // Constant form needs divergences of order 2*alpha and 1-2*alpha; both
    // indices land on the excluded {0, 1} exactly at alpha = 0.5, and the
    // C2 coefficient has a (1-2*alpha)^2 denominator there as well.
    const double s1 = 2.0 * alpha;
    const double s2 = 1.0 - 2.0 * alpha;
    if (s1 != 0.0 && s1 != 1.0 && s2 != 0.0 && s2 != 1.0) {
        const double a2 = alpha * alpha;
        const double b2 = (1.0 - alpha) * (1.0 - alpha);
        const double c1 = 2.0 * alpha * (1.0 - 2.0 * alpha) / a2;
        const double c2 = 2.0 * s1 * (1.0 - 2.0 * s1) / ((1.0 - s1) * (1.0 - s1));
        const double c3 = -1.0 / a2 - 1.0 / b2;
        const double c4 = 2.0 / a2 + 2.0 / b2;
        const double c5 = (1.0 / a2 + 1.0 / b2) * (2.0 - 2.0 * alpha * (1.0 - alpha));
        const double d_a = detail::plug_in_divergence(t_p, alpha, clamps);
        const double d_s1 = detail::plug_in_divergence(t_p, s1, clamps);
        const double d_s2 = detail::plug_in_divergence(t_p, s2, clamps);
        est.sigma_sq_paper = c1 * d_s1 + c2 * d_s2 + c3 * d_a * d_a + c4 * d_a + c5;
    }
    return est;
}

}  // namespace dre

#endif
