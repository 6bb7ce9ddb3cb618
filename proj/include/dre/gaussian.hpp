#ifndef DRE_GAUSSIAN_HPP
#define DRE_GAUSSIAN_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dre/linalg.hpp"
#include "dre/rng.hpp"

namespace dre {

/// Multivariate normal specification; covariance must be SPD.
struct GaussianSpec {
    std::vector<double> mean;
    Matrix covariance;

    int dim() const { return static_cast<int>(mean.size()); }

    static GaussianSpec identity(int d, std::vector<double> mean = {}) {
        GaussianSpec spec;
        spec.mean = mean.empty() ? std::vector<double>(d, 0.0) : std::move(mean);
        if (static_cast<int>(spec.mean.size()) != d)
            throw std::invalid_argument("GaussianSpec: mean length does not match dim");
        spec.covariance = Matrix(d, d);
        for (int i = 0; i < d; ++i) spec.covariance(i, i) = 1.0;
        return spec;
    }

    /// Unit variances with a common off-diagonal correlation rho.
    static GaussianSpec equicorrelated(int d, double rho) {
        GaussianSpec spec = identity(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) spec.covariance(i, j) = rho;
        return spec;
    }
};

enum class SourceLabel { P, Q };

/// n i.i.d. d-dimensional samples from one distribution.
struct SampleSet {
    Matrix data;
    SourceLabel source_label = SourceLabel::P;
    std::optional<GaussianSpec> spec;
    std::uint64_t seed = 0;

    int size() const { return data.rows; }
    int dim() const { return data.cols; }
};

/// Draw n samples as mean + L z with L the Cholesky factor of the
/// covariance and z standard normal from the portable RNG.
inline SampleSet sample_mvn(const GaussianSpec& spec, int n, std::uint64_t seed,
                            SourceLabel label = SourceLabel::P) {
    if (n < 1) throw std::invalid_argument("sample_mvn: n must be >= 1");
    const int d = spec.dim();
    const Matrix chol = cholesky_factor(spec.covariance);

    SampleSet out;
    out.source_label = label;
    out.spec = spec;
    out.seed = seed;
    out.data = Matrix(n, d);
    Rng rng(seed);
    std::vector<double> z(d);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) z[k] = rng.normal();
        for (int j = 0; j < d; ++j) {
            double x = spec.mean[j];
            for (int k = 0; k <= j; ++k) x += chol(j, k) * z[k];
            out.data(i, j) = x;
        }
    }
    return out;
}

namespace detail {

inline void check_same_dim(std::span<const double> mu_p, std::span<const double> mu_q,
                           std::span<const double> x) {
    if (mu_p.size() != mu_q.size() || mu_p.size() != x.size())
        throw std::invalid_argument("gaussian oracle: dimension mismatch");
}

}  // namespace detail

/// Exact ratio q(x)/p(x) for N(mu_q, I) over N(mu_p, I):
///   exp((mu_q - mu_p) . x - (|mu_q|^2 - |mu_p|^2) / 2).
inline double true_ratio_gaussian(std::span<const double> mu_p, std::span<const double> mu_q,
                                  std::span<const double> x) {
    detail::check_same_dim(mu_p, mu_q, x);
    double lin = 0.0, norm_gap = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lin += (mu_q[i] - mu_p[i]) * x[i];
        norm_gap += mu_q[i] * mu_q[i] - mu_p[i] * mu_p[i];
    }
    return std::exp(lin - 0.5 * norm_gap);
}

/// Energy of the exact ratio: T*(x) = -log(q(x)/p(x)).
inline double true_energy_gaussian(std::span<const double> mu_p, std::span<const double> mu_q,
                                   std::span<const double> x) {
    detail::check_same_dim(mu_p, mu_q, x);
    double lin = 0.0, norm_gap = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lin += (mu_q[i] - mu_p[i]) * x[i];
        norm_gap += mu_q[i] * mu_q[i] - mu_p[i] * mu_p[i];
    }
    return -(lin - 0.5 * norm_gap);
}

/// Closed-form alpha-divergence for the shared-identity-covariance pair,
/// from E_P[r^s] = exp(s(s-1) delta^2 / 2) with delta = |mu_q - mu_p|:
///   D_alpha = (exp(alpha(alpha-1) delta^2 / 2) - 1) / (alpha(alpha-1)).
inline double closed_form_alpha_div(std::span<const double> mu_p, std::span<const double> mu_q,
                                    double alpha) {
    if (mu_p.size() != mu_q.size())
        throw std::invalid_argument("closed_form_alpha_div: dimension mismatch");
    if (alpha == 0.0 || alpha == 1.0)
        throw std::invalid_argument("alpha must not be 0 or 1");
    double delta_sq = 0.0;
    for (std::size_t i = 0; i < mu_p.size(); ++i) {
        const double d = mu_q[i] - mu_p[i];
        delta_sq += d * d;
    }
    const double c = alpha * (alpha - 1.0);
    if (delta_sq == 0.0) return 0.0;
    return (std::exp(0.5 * c * delta_sq) - 1.0) / c;
}

}  // namespace dre

#endif
