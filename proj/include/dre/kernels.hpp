#ifndef DRE_KERNELS_HPP
#define DRE_KERNELS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dre/gaussian.hpp"
#include "dre/linalg.hpp"
#include "dre/rng.hpp"

namespace dre {

enum class KernelMethod { Ulsif, Kliep };

/// Gaussian-kernel ratio model r_hat(x) = sum_k w_k exp(-|x-c_k|^2/(2 sigma^2)).
/// uLSIF predictions are clipped at 0; KLIEP weights are nonnegative and
/// normalized so the mean prediction over the P sample is 1.
struct KernelRatioModel {
    Matrix centers;
    double sigma = 1.0;
    std::vector<double> weights;
    KernelMethod kind = KernelMethod::Ulsif;
    bool converged = true;
    std::vector<double> objective_trace;  // KLIEP: accepted objective values, non-decreasing
};

inline double gaussian_kernel(std::span<const double> x, std::span<const double> c,
                              double sigma) {
    return std::exp(-squared_distance(x, c) / (2.0 * sigma * sigma));
}

/// n_points x n_centers kernel design matrix.
inline Matrix kernel_design(const Matrix& points, const Matrix& centers, double sigma) {
    Matrix k(points.rows, centers.rows);
    for (int i = 0; i < points.rows; ++i)
        for (int j = 0; j < centers.rows; ++j)
            k(i, j) = gaussian_kernel(points.row(i), centers.row(j), sigma);
    return k;
}

/// Median pairwise distance over a subsample of the pooled data; the
/// standard bandwidth heuristic when sigma is not given.
inline double median_pairwise_distance(const Matrix& data_p, const Matrix& data_q,
                                       std::uint64_t seed, int max_points = 500) {
    const int total = data_p.rows + data_q.rows;
    std::vector<int> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, 101);
    rng.shuffle(idx);
    const int m = std::min(max_points, total);
    auto point = [&](int i) {
        return i < data_p.rows ? data_p.row(i) : data_q.row(i - data_p.rows);
    };
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            dists.push_back(std::sqrt(squared_distance(point(idx[i]), point(idx[j]))));
    if (dists.empty()) return 1.0;
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    return std::max(dists[dists.size() / 2], 1e-12);
}

namespace detail {

inline Matrix subsample_centers(const Matrix& data_q, int n_centers, std::uint64_t seed) {
    if (n_centers < 1) throw std::invalid_argument("kernel fit: n_centers must be >= 1");
    if (n_centers > data_q.rows)
        throw std::invalid_argument("kernel fit: n_centers exceeds Q sample size");
    std::vector<int> idx(data_q.rows);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, 100);
    rng.shuffle(idx);
    Matrix centers(n_centers, data_q.cols);
    for (int i = 0; i < n_centers; ++i)
        for (int j = 0; j < data_q.cols; ++j) centers(i, j) = data_q(idx[i], j);
    return centers;
}

/// H = E_P-hat[k k^T] over the rows of the design matrix; h = column means.
inline Matrix gram_mean(const Matrix& design) {
    const int n = design.rows, c = design.cols;
    Matrix h(c, c);
    for (int i = 0; i < n; ++i) {
        const auto ki = design.row(i);
        for (int a = 0; a < c; ++a)
            for (int b = a; b < c; ++b) h(a, b) += ki[a] * ki[b];
    }
    for (int a = 0; a < c; ++a)
        for (int b = a; b < c; ++b) {
            h(a, b) /= n;
            h(b, a) = h(a, b);
        }
    return h;
}

inline std::vector<double> column_means(const Matrix& design) {
    std::vector<double> h(design.cols, 0.0);
    for (int i = 0; i < design.rows; ++i) {
        const auto ki = design.row(i);
        for (int j = 0; j < design.cols; ++j) h[j] += ki[j];
    }
    for (double& x : h) x /= design.rows;
    return h;
}

inline std::vector<double> ridge_solve(Matrix h, std::span<const double> rhs, double lambda) {
    for (int i = 0; i < h.rows; ++i) h(i, i) += lambda;
    return cholesky_solve(cholesky_factor(h), rhs);
}

}  // namespace detail

/// Least-squares importance fitting: weights = (H + lambda I)^-1 h with
/// H_kl = E_P-hat[K_k K_l] and h_k = E_Q-hat[K_k]. sigma defaults to the
/// median-distance heuristic; lambda defaults to 5-fold CV over
/// {1e-3, 1e-2, 1e-1, 1} minimizing the least-squares criterion.
inline KernelRatioModel ulsif_fit(const SampleSet& data_p, const SampleSet& data_q,
                                  int n_centers, std::optional<double> sigma,
                                  std::optional<double> lambda, std::uint64_t seed) {
    if (data_p.dim() != data_q.dim())
        throw std::invalid_argument("ulsif_fit: P and Q dimension mismatch");
    if (lambda && *lambda <= 0.0)
        throw std::invalid_argument("ulsif_fit: lambda must be > 0");
    if (sigma && *sigma <= 0.0)
        throw std::invalid_argument("ulsif_fit: sigma must be > 0");

    KernelRatioModel model;
    model.kind = KernelMethod::Ulsif;
    model.centers = detail::subsample_centers(data_q.data, n_centers, seed);
    model.sigma = sigma ? *sigma : median_pairwise_distance(data_p.data, data_q.data, seed);

    const Matrix design_p = kernel_design(data_p.data, model.centers, model.sigma);
    const Matrix design_q = kernel_design(data_q.data, model.centers, model.sigma);

    double chosen_lambda;
    if (lambda) {
        chosen_lambda = *lambda;
    } else {
        const std::vector<double> grid = {1e-3, 1e-2, 1e-1, 1.0};
        const int folds = 5;
        std::vector<int> idx_p(data_p.size()), idx_q(data_q.size());
        std::iota(idx_p.begin(), idx_p.end(), 0);
        std::iota(idx_q.begin(), idx_q.end(), 0);
        Rng rng(seed, 102);
        rng.shuffle(idx_p);
        rng.shuffle(idx_q);
        auto fold_rows = [&](const Matrix& design, const std::vector<int>& idx, int fold,
                             bool in_fold) {
            std::vector<int> rows;
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const bool member = static_cast<int>(i % folds) == fold;
                if (member == in_fold) rows.push_back(idx[i]);
            }
            Matrix out(static_cast<int>(rows.size()), design.cols);
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (int j = 0; j < design.cols; ++j) out(static_cast<int>(i), j) = design(rows[i], j);
            return out;
        };
        double best_score = 0.0;
        chosen_lambda = grid.front();
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            double score = 0.0;
            for (int fold = 0; fold < folds; ++fold) {
                const Matrix dp_tr = fold_rows(design_p, idx_p, fold, false);
                const Matrix dq_tr = fold_rows(design_q, idx_q, fold, false);
                const Matrix dp_va = fold_rows(design_p, idx_p, fold, true);
                const Matrix dq_va = fold_rows(design_q, idx_q, fold, true);
                const auto w = detail::ridge_solve(detail::gram_mean(dp_tr),
                                                   detail::column_means(dq_tr), grid[gi]);
                // J = E_P[r_hat^2]/2 - E_Q[r_hat] on the validation fold.
                const Matrix h_va = detail::gram_mean(dp_va);
                const auto hq_va = detail::column_means(dq_va);
                double quad = 0.0;
                for (int a = 0; a < h_va.rows; ++a)
                    quad += w[a] * dot(h_va.row(a), w);
                score += 0.5 * quad - dot(hq_va, w);
            }
            if (gi == 0 || score < best_score) {
                best_score = score;
                chosen_lambda = grid[gi];
            }
        }
    }

    model.weights = detail::ridge_solve(detail::gram_mean(design_p),
                                        detail::column_means(design_q), chosen_lambda);
    return model;
}

/// KL importance estimation: projected gradient ascent on E_Q-hat[log r_hat]
/// under weights >= 0 and E_P-hat[r_hat] = 1. Accepted iterates improve the
/// objective; 50 consecutive non-improving iterations stop the search and
/// flag converged = false.
inline KernelRatioModel kliep_fit(const SampleSet& data_p, const SampleSet& data_q,
                                  int n_centers, std::optional<double> sigma, int max_iters,
                                  double step, std::uint64_t seed) {
    if (data_p.dim() != data_q.dim())
        throw std::invalid_argument("kliep_fit: P and Q dimension mismatch");
    if (sigma && *sigma <= 0.0)
        throw std::invalid_argument("kliep_fit: sigma must be > 0");
    if (step <= 0.0) throw std::invalid_argument("kliep_fit: step must be > 0");

    KernelRatioModel model;
    model.kind = KernelMethod::Kliep;
    model.centers = detail::subsample_centers(data_q.data, n_centers, seed);
    model.sigma = sigma ? *sigma : median_pairwise_distance(data_p.data, data_q.data, seed);

    const Matrix a = kernel_design(data_q.data, model.centers, model.sigma);
    const std::vector<double> b = detail::column_means(
        kernel_design(data_p.data, model.centers, model.sigma));
    const double b_sq = dot(b, b);
    if (b_sq <= 0.0) throw std::runtime_error("kliep_fit: degenerate kernel (P design is zero)");

    const int m = a.rows;
    const int c = a.cols;
    auto project = [&](std::vector<double>& w) {
        const double gap = 1.0 - dot(b, w);
        for (int k = 0; k < c; ++k) w[k] += b[k] * gap / b_sq;
        for (double& x : w) x = std::max(x, 0.0);
        const double scale = dot(b, w);
        if (scale <= 0.0) throw std::runtime_error("kliep_fit: projection collapsed to zero");
        for (double& x : w) x /= scale;
    };
    auto objective = [&](const std::vector<double>& w, std::vector<double>& r) {
        double obj = 0.0;
        for (int i = 0; i < m; ++i) {
            r[i] = dot(a.row(i), w);
            obj += std::log(std::max(r[i], 1e-300));
        }
        return obj / m;
    };

    std::vector<double> w(c, 1.0);
    project(w);
    std::vector<double> r(m);
    double best_obj = objective(w, r);
    std::vector<double> best_w = w;
    model.objective_trace.push_back(best_obj);

    model.converged = true;
    int stall = 0;
    for (int iter = 0; iter < max_iters; ++iter) {
        // grad_k = E_Q-hat[K_k / r_hat]
        std::vector<double> grad(c, 0.0);
        for (int i = 0; i < m; ++i) {
            const double inv_r = 1.0 / std::max(r[i], 1e-300);
            const auto ai = a.row(i);
            for (int k = 0; k < c; ++k) grad[k] += ai[k] * inv_r;
        }
        for (int k = 0; k < c; ++k) w[k] += step * grad[k] / m;
        project(w);
        const double obj = objective(w, r);
        if (obj > best_obj) {
            best_obj = obj;
            best_w = w;
            model.objective_trace.push_back(obj);
            stall = 0;
        } else if (++stall >= 50) {
            model.converged = false;
            break;
        }
    }
    model.weights = std::move(best_w);
    return model;
}

inline double kernel_predict_one(const KernelRatioModel& model, std::span<const double> x) {
    if (static_cast<int>(x.size()) != model.centers.cols)
        throw std::invalid_argument("kernel_predict: dimension mismatch");
    double r = 0.0;
    for (int k = 0; k < model.centers.rows; ++k)
        r += model.weights[k] * gaussian_kernel(x, model.centers.row(k), model.sigma);
    if (model.kind == KernelMethod::Ulsif) r = std::max(r, 0.0);
    return r;
}

inline std::vector<double> kernel_predict(const KernelRatioModel& model, const Matrix& x) {
    std::vector<double> out(x.rows);
    for (int i = 0; i < x.rows; ++i) out[i] = kernel_predict_one(model, x.row(i));
    return out;
}

}  // namespace dre

#endif
