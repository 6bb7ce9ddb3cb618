#ifndef DRE_SERIALIZE_HPP
#define DRE_SERIALIZE_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dre/divergence.hpp"
#include "dre/experiments.hpp"
#include "dre/gaussian.hpp"
#include "dre/train.hpp"

namespace dre {

using json = nlohmann::json;

/// Write a file atomically: temp file in the same directory, then rename.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// --------------------------------------------------------------------------
// Model JSON: {layer_sizes, weights (row-major nested arrays), biases}.

inline json mlp_to_json(const MlpModel& model) {
    json j;
    j["layer_sizes"] = model.layer_sizes;
    json weights = json::array();
    for (const auto& w : model.weights) {
        json rows = json::array();
        for (int r = 0; r < w.rows; ++r) {
            json row = json::array();
            for (int c = 0; c < w.cols; ++c) row.push_back(w(r, c));
            rows.push_back(std::move(row));
        }
        weights.push_back(std::move(rows));
    }
    j["weights"] = std::move(weights);
    j["biases"] = model.biases;
    return j;
}

inline MlpModel mlp_from_json(const json& j) {
    MlpModel model;
    model.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    if (model.layer_sizes.size() < 2)
        throw std::runtime_error("model json: layer_sizes too short");
    for (const auto& layer : j.at("weights")) {
        Matrix w(static_cast<int>(layer.size()),
                 static_cast<int>(layer.empty() ? 0 : layer[0].size()));
        for (int r = 0; r < w.rows; ++r)
            for (int c = 0; c < w.cols; ++c) w(r, c) = layer[r][c].get<double>();
        model.weights.push_back(std::move(w));
    }
    model.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    if (model.weights.size() + 1 != model.layer_sizes.size())
        throw std::runtime_error("model json: weights/layer_sizes mismatch");
    for (std::size_t l = 0; l < model.weights.size(); ++l)
        if (model.weights[l].rows != model.layer_sizes[l + 1] ||
            model.weights[l].cols != model.layer_sizes[l] ||
            static_cast<int>(model.biases[l].size()) != model.layer_sizes[l + 1])
            throw std::runtime_error("model json: shape mismatch in layer " + std::to_string(l));
    return model;
}

inline json ratio_model_to_json(const RatioModel& model) {
    json j;
    j["network"] = mlp_to_json(model.network);
    j["normalizer"] = model.normalizer;
    j["reference_size"] = model.reference_size;
    return j;
}

inline RatioModel ratio_model_from_json(const json& j) {
    RatioModel model;
    model.network = mlp_from_json(j.at("network"));
    model.normalizer = j.at("normalizer").get<double>();
    model.reference_size = j.at("reference_size").get<int>();
    if (!(model.normalizer > 0.0))
        throw std::runtime_error("model json: normalizer must be positive");
    return model;
}

inline json divergence_to_json(const DivergenceEstimate& est) {
    json j;
    j["alpha"] = est.alpha;
    j["d_hat"] = est.d_hat;
    j["sigma_sq_moment"] = est.sigma_sq_moment;
    if (std::isfinite(est.sigma_sq_paper)) {
        j["sigma_sq_paper"] = est.sigma_sq_paper;
    } else {
        j["sigma_sq_paper"] = nullptr;
        j["sigma_sq_paper_note"] =
            "constant form singular at this alpha (divergence order hits 0 or 1)";
    }
    j["n"] = est.n;
    return j;
}

// --------------------------------------------------------------------------
// CSV schemas.

/// Samples: header x1,...,xd then one row per sample.
inline std::string samples_to_csv(const Matrix& data) {
    std::ostringstream out;
    for (int j = 0; j < data.cols; ++j) out << (j ? "," : "") << "x" << (j + 1);
    out << "\n";
    for (int i = 0; i < data.rows; ++i) {
        for (int j = 0; j < data.cols; ++j) out << (j ? "," : "") << format_double(data(i, j));
        out << "\n";
    }
    return out.str();
}

inline Matrix samples_from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty samples file " + path.string());
    int cols = 1;
    for (char ch : line)
        if (ch == ',') ++cols;
    std::vector<double> values;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        int c = 0;
        while (std::getline(ls, cell, ',')) {
            values.push_back(std::stod(cell));
            ++c;
        }
        if (c != cols)
            throw std::runtime_error("ragged row in " + path.string() + " at line " +
                                     std::to_string(rows + 2));
        ++rows;
    }
    if (rows == 0) throw std::runtime_error("no sample rows in " + path.string());
    Matrix data(rows, cols);
    data.data = std::move(values);
    return data;
}

/// Ratios: x1..xd,r_hat.
inline std::string ratios_to_csv(const Matrix& points, const std::vector<double>& r_hat) {
    std::ostringstream out;
    for (int j = 0; j < points.cols; ++j) out << "x" << (j + 1) << ",";
    out << "r_hat\n";
    for (int i = 0; i < points.rows; ++i) {
        for (int j = 0; j < points.cols; ++j) out << format_double(points(i, j)) << ",";
        out << format_double(r_hat[i]) << "\n";
    }
    return out.str();
}

/// Training trace: step,loss (wall-clock lives in timing.json, not here).
inline std::string trace_to_csv(const TrainTrace& trace) {
    std::ostringstream out;
    out << "step,loss\n";
    for (std::size_t s = 0; s < trace.step_loss.size(); ++s)
        out << s << "," << format_double(trace.step_loss[s]) << "\n";
    return out.str();
}

/// Stability: alpha,step,q05,q45,q50,q55,q95.
inline std::string stability_to_csv(const std::vector<StabilityResult>& results) {
    std::ostringstream out;
    out << "alpha,step,q05,q45,q50,q55,q95\n";
    for (const auto& res : results)
        for (std::size_t s = 0; s < res.q50.size(); ++s)
            out << format_double(res.alpha) << "," << s << "," << format_double(res.q05[s]) << ","
                << format_double(res.q45[s]) << "," << format_double(res.q50[s]) << ","
                << format_double(res.q55[s]) << "," << format_double(res.q95[s]) << "\n";
    return out.str();
}

/// MSE benchmark: method,dim,mean_mse,std_mse,n_trials,n_excluded.
inline std::string mse_to_csv(const std::vector<MseBenchmarkRow>& rows) {
    std::ostringstream out;
    out << "method,dim,mean_mse,std_mse,n_trials,n_excluded\n";
    for (const auto& row : rows)
        out << benchmark_method_name(row.method) << "," << row.dim << ","
            << format_double(row.mean_mse) << "," << format_double(row.std_mse) << ","
            << row.n_trials << "," << row.n_excluded << "\n";
    return out.str();
}

/// Scaling: dim,K,l1_mean,l1_std.
inline std::string scaling_to_csv(const ScalingResult& result) {
    std::ostringstream out;
    out << "dim,K,l1_mean,l1_std\n";
    for (std::size_t i = 0; i < result.sample_sizes.size(); ++i)
        out << result.dim << "," << result.sample_sizes[i] << ","
            << format_double(result.l1_errors[i]) << "," << format_double(result.l1_stds[i])
            << "\n";
    return out.str();
}

}  // namespace dre

#endif
