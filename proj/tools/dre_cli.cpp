// Command-line front door for the density ratio estimation toolkit.
//
// Exit codes: 0 success, 1 runtime/data error, 2 usage error.
// Every subcommand writes a deterministic manifest.json (resolved config,
// seeds, version, output list) sufficient to re-run it exactly, plus a
// timing.json that is excluded from the determinism contract.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dre/divergence.hpp"
#include "dre/experiments.hpp"
#include "dre/gaussian.hpp"
#include "dre/kernels.hpp"
#include "dre/serialize.hpp"
#include "dre/train.hpp"
#include "dre/version.hpp"

namespace fs = std::filesystem;
using dre::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Ties CLI11 options to JSON config keys. Precedence: explicit flags beat
/// config-file values beat defaults. Unknown or ill-typed config keys are
/// usage errors naming the field.
class ConfigBinder {
public:
    template <typename T>
    CLI::Option* add_option(CLI::App* app, const std::string& flag, T& var,
                            const std::string& desc) {
        CLI::Option* opt = app->add_option(flag, var, desc);
        register_setter<T>(key_of(opt), var);
        return opt;
    }

    CLI::Option* add_flag(CLI::App* app, const std::string& flag, bool& var,
                          const std::string& desc) {
        CLI::Option* opt = app->add_flag(flag, var, desc);
        register_setter<bool>(key_of(opt), var);
        return opt;
    }

    void apply_config(const json& cfg, CLI::App* app) {
        if (!cfg.is_object()) throw UsageError("config file: top level must be a JSON object");
        for (const auto& [key, value] : cfg.items()) {
            auto it = setters_.find(key);
            if (it == setters_.end())
                throw UsageError("config file: unknown key '" + key + "'");
            CLI::Option* opt = app->get_option_no_throw("--" + key);
            if (opt != nullptr && opt->count() > 0) continue;  // flag wins
            it->second(value);
        }
    }

private:
    static std::string key_of(const CLI::Option* opt) {
        std::string name = opt->get_lnames().front();
        return name;
    }

    template <typename T>
    void register_setter(const std::string& key, T& var) {
        setters_[key] = [&var, key](const json& value) {
            try {
                var = value.get<T>();
            } catch (const json::exception&) {
                throw UsageError("config file: type error for key '" + key + "'");
            }
        };
    }

    std::map<std::string, std::function<void(const json&)>> setters_;
};

struct CommonOpts {
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::string profile = "desk";
    int jobs = 1;
    std::string config_file;
};

void add_common(CLI::App* app, ConfigBinder& binder, CommonOpts& opts) {
    binder.add_option(app, "--seed", opts.seed, "base RNG seed");
    binder.add_option(app, "--output-dir", opts.output_dir, "directory for result files");
    app->add_option("--config", opts.config_file, "JSON config file (flags override it)");
    binder.add_option(app, "--profile", opts.profile, "desk or full protocol defaults");
    binder.add_option(app, "--jobs", opts.jobs, "max concurrent trials");
}

void finish_config(CLI::App* app, ConfigBinder& binder, const CommonOpts& opts) {
    if (opts.config_file.empty()) return;
    std::ifstream in(opts.config_file);
    if (!in) throw std::runtime_error("cannot read config file " + opts.config_file);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("config file: " + std::string(e.what()));
    }
    binder.apply_config(cfg, app);
}

void check_alpha_field(double alpha, const std::string& field) {
    if (alpha == 0.0 || alpha == 1.0)
        throw UsageError(field + " must not be 0 or 1 (the alpha-divergence excludes them)");
}

void check_profile(const std::string& profile) {
    if (profile != "desk" && profile != "full")
        throw UsageError("profile must be 'desk' or 'full'");
}

fs::path prepare_output_dir(const CommonOpts& opts) {
    fs::path dir(opts.output_dir);
    fs::create_directories(dir);
    return dir;
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const CommonOpts& opts,
                    json config, const std::vector<std::string>& outputs) {
    json manifest;
    manifest["subcommand"] = subcommand;
    manifest["version"] = dre::kVersion;
    manifest["seed"] = opts.seed;
    manifest["profile"] = opts.profile;
    config["seed"] = opts.seed;
    config["profile"] = opts.profile;
    config["jobs"] = opts.jobs;
    manifest["config"] = std::move(config);
    manifest["outputs"] = outputs;
    dre::atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

void write_timing(const fs::path& dir, double seconds) {
    json timing;
    timing["wall_clock_sec"] = seconds;
    dre::atomic_write(dir / "timing.json", timing.dump(2) + "\n");
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<int> parse_hidden(const std::string& hidden) {
    std::vector<int> out;
    std::istringstream in(hidden);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        try {
            out.push_back(std::stoi(cell));
        } catch (const std::exception&) {
            throw UsageError("hidden: expected comma-separated integers, got '" + hidden + "'");
        }
    }
    if (out.empty()) throw UsageError("hidden: no layer sizes given");
    return out;
}

dre::LossKind parse_loss(const std::string& name, double alpha) {
    if (name == "alpha-div") return dre::LossKind::alpha_div(alpha);
    if (name == "kl") return dre::LossKind::kl();
    if (name == "reverse-kl") return dre::LossKind::reverse_kl();
    if (name == "pearson-chi2") return dre::LossKind::pearson_chi2();
    if (name == "squared-hellinger") return dre::LossKind::squared_hellinger();
    if (name == "gan") return dre::LossKind::gan();
    throw UsageError("loss: unknown loss '" + name +
                     "' (expected alpha-div, kl, reverse-kl, pearson-chi2, squared-hellinger, gan)");
}

dre::OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "adam") return dre::OptimizerKind::Adam;
    if (name == "sgd") return dre::OptimizerKind::Sgd;
    throw UsageError("optimizer: expected 'adam' or 'sgd', got '" + name + "'");
}

// ---------------------------------------------------------------------------

struct StabilityOpts {
    CommonOpts common;
    std::vector<double> alphas = {-3.0, -2.0, -1.0, 0.2, 0.5, 0.8, 2.0, 3.0, 4.0};
    int trials = 0;  // 0 = profile default
    int epochs = 0;
    int n_samples = 0;
    int batch_size = 0;
    std::string hidden;
    double learning_rate = 0.0;
};

int cmd_stability(const StabilityOpts& opts) {
    check_profile(opts.common.profile);
    for (double a : opts.alphas) check_alpha_field(a, "alphas");

    dre::StabilityConfig config = opts.common.profile == "full" ? dre::StabilityConfig::full()
                                                                : dre::StabilityConfig::desk();
    config.jobs = opts.common.jobs;
    if (opts.epochs > 0) config.epochs = opts.epochs;
    if (opts.n_samples > 0) config.n_samples = opts.n_samples;
    if (opts.batch_size > 0) config.batch_size = opts.batch_size;
    if (opts.learning_rate > 0) config.learning_rate = opts.learning_rate;
    if (!opts.hidden.empty()) config.hidden = parse_hidden(opts.hidden);
    const int trials = opts.trials > 0 ? opts.trials
                                       : (opts.common.profile == "full" ? 100 : 20);

    Stopwatch watch;
    const auto results = dre::run_stability(opts.alphas, trials, opts.common.seed, config);
    const fs::path dir = prepare_output_dir(opts.common);
    dre::atomic_write(dir / "stability.csv", dre::stability_to_csv(results));

    json summary = json::array();
    for (const auto& res : results)
        summary.push_back({{"alpha", res.alpha},
                           {"diverged_fraction", res.diverged_fraction},
                           {"min_loss", res.min_loss},
                           {"n_trials", res.n_trials}});
    json config_json{{"alphas", opts.alphas},
                     {"trials", trials},
                     {"n_samples", config.n_samples},
                     {"hidden", config.hidden},
                     {"learning-rate", config.learning_rate},
                     {"batch-size", config.batch_size},
                     {"epochs", config.epochs}};
    config_json["summary"] = std::move(summary);
    write_manifest(dir, "stability", opts.common, std::move(config_json), {"stability.csv"});
    write_timing(dir, watch.seconds());
    return 0;
}

struct MseOpts {
    CommonOpts common;
    std::vector<int> dims;
    int trials = 0;
    int epochs = 0;
    double alpha = 0.5;
};

int cmd_mse_benchmark(const MseOpts& opts) {
    check_profile(opts.common.profile);
    check_alpha_field(opts.alpha, "alpha");

    dre::MseConfig config = opts.common.profile == "full" ? dre::MseConfig::full()
                                                          : dre::MseConfig::desk();
    config.jobs = opts.common.jobs;
    config.alpha = opts.alpha;
    if (opts.epochs > 0) config.epochs = opts.epochs;
    std::vector<int> dims = opts.dims;
    if (dims.empty())
        dims = opts.common.profile == "full" ? std::vector<int>{10, 20, 30, 50, 100}
                                             : std::vector<int>{10, 30};
    const int trials = opts.trials > 0 ? opts.trials
                                       : (opts.common.profile == "full" ? 100 : 20);

    Stopwatch watch;
    const auto rows = dre::run_mse_benchmark(dims, trials, opts.common.seed, config);
    const fs::path dir = prepare_output_dir(opts.common);
    dre::atomic_write(dir / "mse.csv", dre::mse_to_csv(rows));

    json aborted = json::array();
    for (const auto& row : rows)
        if (row.n_aborted > 0)
            aborted.push_back({{"method", dre::benchmark_method_name(row.method)},
                               {"dim", row.dim},
                               {"n_aborted", row.n_aborted}});
    json config_json{{"dims", dims},
                     {"trials", trials},
                     {"alpha", config.alpha},
                     {"epochs", config.epochs},
                     {"n-train", config.n_train},
                     {"n-test", config.n_test},
                     {"exclusion", "MSE > 1000, applied overall per (method, dim) row"},
                     {"aborted-trials", std::move(aborted)}};
    write_manifest(dir, "mse-benchmark", opts.common, std::move(config_json), {"mse.csv"});
    write_timing(dir, watch.seconds());
    return 0;
}

struct ScalingOpts {
    CommonOpts common;
    int dim = 2;
    std::vector<int> sample_sizes = {250, 1000, 4000};
    int trials = 0;
    bool plug_in = false;
    int epochs = 0;
    double alpha = 0.5;
};

int cmd_scaling(const ScalingOpts& opts) {
    check_profile(opts.common.profile);
    check_alpha_field(opts.alpha, "alpha");

    dre::ScalingConfig config;
    config.plug_in = opts.plug_in;
    config.jobs = opts.common.jobs;
    config.alpha = opts.alpha;
    if (opts.trials > 0) config.n_trials = opts.trials;
    if (opts.epochs > 0) config.epochs = opts.epochs;

    Stopwatch watch;
    const auto result = dre::run_scaling(opts.dim, opts.sample_sizes, opts.common.seed, config);
    const fs::path dir = prepare_output_dir(opts.common);
    dre::atomic_write(dir / "scaling.csv", dre::scaling_to_csv(result));

    json config_json{{"dim", opts.dim},
                     {"sample-sizes", opts.sample_sizes},
                     {"trials", config.n_trials},
                     {"plug-in", config.plug_in},
                     {"alpha", config.alpha},
                     {"epochs", config.epochs}};
    if (std::isfinite(result.fitted_loglog_slope))
        config_json["fitted_loglog_slope"] = result.fitted_loglog_slope;
    else
        config_json["fitted_loglog_slope"] = nullptr;  // absent: fewer than two sizes
    write_manifest(dir, "scaling", opts.common, std::move(config_json), {"scaling.csv"});
    write_timing(dir, watch.seconds());
    return 0;
}

struct TrainOpts {
    CommonOpts common;
    std::string p_csv, q_csv;
    int gen_dim = 0;
    int gen_n = 1000;
    double gen_shift = 1.0;
    double gen_rho = 0.0;
    std::string hidden = "100,100,100";
    std::string loss = "alpha-div";
    double alpha = 0.5;
    std::string optimizer = "adam";
    double learning_rate = 1e-3;
    int batch_size = 128;
    int epochs = 100;
};

int cmd_train(const TrainOpts& opts) {
    if (opts.loss == "alpha-div") check_alpha_field(opts.alpha, "alpha");
    const dre::LossKind loss = parse_loss(opts.loss, opts.alpha);
    const dre::OptimizerKind optimizer = parse_optimizer(opts.optimizer);

    const bool have_csv = !opts.p_csv.empty() || !opts.q_csv.empty();
    if (have_csv && opts.gen_dim > 0)
        throw UsageError("train: give either --p-csv/--q-csv or --gen-dim, not both");
    if (have_csv && (opts.p_csv.empty() || opts.q_csv.empty()))
        throw UsageError("train: both --p-csv and --q-csv are required with file input");
    if (!have_csv && opts.gen_dim <= 0)
        throw UsageError("train: need --p-csv/--q-csv or a generator via --gen-dim");

    dre::SampleSet data_p, data_q;
    if (have_csv) {
        if (!fs::exists(opts.p_csv))
            throw std::runtime_error("train: cannot read P samples from " + opts.p_csv);
        if (!fs::exists(opts.q_csv))
            throw std::runtime_error("train: cannot read Q samples from " + opts.q_csv);
        data_p.data = dre::samples_from_csv(opts.p_csv);
        data_p.source_label = dre::SourceLabel::P;
        data_q.data = dre::samples_from_csv(opts.q_csv);
        data_q.source_label = dre::SourceLabel::Q;
    } else {
        const int d = opts.gen_dim;
        dre::GaussianSpec spec_p = opts.gen_rho != 0.0
                                       ? dre::GaussianSpec::equicorrelated(d, opts.gen_rho)
                                       : dre::GaussianSpec::identity(d);
        dre::GaussianSpec spec_q = spec_p;
        spec_q.mean[0] = opts.gen_shift;
        data_p = dre::sample_mvn(spec_p, opts.gen_n, dre::derive_seed(opts.common.seed, 10),
                                 dre::SourceLabel::P);
        data_q = dre::sample_mvn(spec_q, opts.gen_n, dre::derive_seed(opts.common.seed, 11),
                                 dre::SourceLabel::Q);
    }

    std::vector<int> arch;
    arch.push_back(data_p.dim());
    for (int h : parse_hidden(opts.hidden)) arch.push_back(h);
    arch.push_back(1);

    dre::TrainConfig tc;
    tc.loss = loss;
    tc.optimizer = optimizer;
    tc.learning_rate = opts.learning_rate;
    tc.batch_size = opts.batch_size;
    tc.epochs = opts.epochs;
    tc.seed = dre::derive_seed(opts.common.seed, 12);

    Stopwatch watch;
    auto [model, trace] = dre::train(data_p, data_q, arch, tc);
    const fs::path dir = prepare_output_dir(opts.common);
    dre::atomic_write(dir / "model.json", dre::ratio_model_to_json(model).dump(2) + "\n");
    dre::atomic_write(dir / "trace.csv", dre::trace_to_csv(trace));

    json config_json{{"p-csv", opts.p_csv},
                     {"q-csv", opts.q_csv},
                     {"gen-dim", opts.gen_dim},
                     {"gen-n", opts.gen_n},
                     {"gen-shift", opts.gen_shift},
                     {"gen-rho", opts.gen_rho},
                     {"hidden", opts.hidden},
                     {"loss", opts.loss},
                     {"alpha", opts.alpha},
                     {"optimizer", opts.optimizer},
                     {"learning-rate", opts.learning_rate},
                     {"batch-size", opts.batch_size},
                     {"epochs", opts.epochs},
                     {"normalizer", model.normalizer},
                     {"clamp-events", trace.clamp_events}};
    write_manifest(dir, "train", opts.common, std::move(config_json),
                   {"model.json", "trace.csv"});
    write_timing(dir, watch.seconds());
    return 0;
}

struct EstimateOpts {
    CommonOpts common;
    std::string model_file;
    std::string points_file;
    std::string q_points_file;
    double alpha = 0.5;
};

int cmd_estimate(const EstimateOpts& opts) {
    check_alpha_field(opts.alpha, "alpha");
    if (opts.model_file.empty()) throw UsageError("estimate: --model is required");
    if (opts.points_file.empty()) throw UsageError("estimate: --points is required");

    std::ifstream in(opts.model_file);
    if (!in) throw std::runtime_error("estimate: cannot read model " + opts.model_file);
    dre::RatioModel model;
    try {
        model = dre::ratio_model_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw std::runtime_error("estimate: bad model json: " + std::string(e.what()));
    }

    const dre::Matrix points = dre::samples_from_csv(opts.points_file);
    if (points.cols != model.network.input_dim())
        throw std::runtime_error("estimate: points dimension " + std::to_string(points.cols) +
                                 " does not match model input " +
                                 std::to_string(model.network.input_dim()));

    Stopwatch watch;
    const std::vector<double> r_hat = dre::predict_ratio(model, points);
    const fs::path dir = prepare_output_dir(opts.common);
    dre::atomic_write(dir / "ratios.csv", dre::ratios_to_csv(points, r_hat));

    std::vector<std::string> outputs = {"ratios.csv"};
    if (!opts.q_points_file.empty()) {
        const dre::Matrix q_points = dre::samples_from_csv(opts.q_points_file);
        if (q_points.cols != model.network.input_dim())
            throw std::runtime_error("estimate: Q points dimension mismatch");
        const std::vector<double> t_p = dre::mlp_forward(model.network, points);
        const std::vector<double> t_q = dre::mlp_forward(model.network, q_points);
        const dre::DivergenceEstimate est = dre::estimate_divergence(t_q, t_p, opts.alpha);
        dre::atomic_write(dir / "estimate.json", dre::divergence_to_json(est).dump(2) + "\n");
        outputs.push_back("estimate.json");
    }

    json config_json{{"model", opts.model_file},
                     {"points", opts.points_file},
                     {"q-points", opts.q_points_file},
                     {"alpha", opts.alpha}};
    write_manifest(dir, "estimate", opts.common, std::move(config_json), outputs);
    write_timing(dir, watch.seconds());
    return 0;
}

struct ProbeOpts {
    CommonOpts common;
    double alpha = 0.5;
    double t_const = 0.0;
    int dim = 5;
    int n = 256;
    std::string hidden = "32,32";
};

int cmd_probe_gradients(const ProbeOpts& opts) {
    check_alpha_field(opts.alpha, "alpha");

    std::vector<int> arch;
    arch.push_back(opts.dim);
    for (int h : parse_hidden(opts.hidden)) arch.push_back(h);
    arch.push_back(1);
    const dre::MlpModel model = dre::mlp_init(arch, dre::derive_seed(opts.common.seed, 20));
    const dre::GaussianSpec spec = dre::GaussianSpec::identity(opts.dim);
    const dre::SampleSet batch_p =
        dre::sample_mvn(spec, opts.n, dre::derive_seed(opts.common.seed, 21), dre::SourceLabel::P);
    const dre::SampleSet batch_q =
        dre::sample_mvn(spec, opts.n, dre::derive_seed(opts.common.seed, 22), dre::SourceLabel::Q);

    Stopwatch watch;
    const dre::RegimeReport report =
        dre::gradient_regime_probe(opts.alpha, opts.t_const, model, batch_p.data, batch_q.data);
    const fs::path dir = prepare_output_dir(opts.common);
    json probe{{"alpha", opts.alpha},
               {"t_const", opts.t_const},
               {"grad_norm", report.grad_norm},
               {"classification", dre::regime_name(report.classification)},
               {"q_side_scale", report.q_side_scale},
               {"p_side_scale", report.p_side_scale}};
    dre::atomic_write(dir / "probe.json", probe.dump(2) + "\n");

    json config_json{{"alpha", opts.alpha},
                     {"t-const", opts.t_const},
                     {"dim", opts.dim},
                     {"n", opts.n},
                     {"hidden", opts.hidden}};
    write_manifest(dir, "probe-gradients", opts.common, std::move(config_json), {"probe.json"});
    write_timing(dir, watch.seconds());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dre: density ratio estimation with the alpha-divergence loss"};
    app.require_subcommand(0, 1);

    StabilityOpts stability;
    ConfigBinder stability_binder;
    CLI::App* stability_app =
        app.add_subcommand("stability", "training-loss stability bands across alpha values");
    add_common(stability_app, stability_binder, stability.common);
    stability_binder.add_option(stability_app, "--alphas", stability.alphas,
                                "alpha values to train at");
    stability_binder.add_option(stability_app, "--trials", stability.trials, "trials per alpha");
    stability_binder.add_option(stability_app, "--epochs", stability.epochs, "epochs per trial");
    stability_binder.add_option(stability_app, "--n-samples", stability.n_samples,
                                "samples per distribution");
    stability_binder.add_option(stability_app, "--batch-size", stability.batch_size,
                                "minibatch size");
    stability_binder.add_option(stability_app, "--hidden", stability.hidden,
                                "hidden layer sizes, comma separated");
    stability_binder.add_option(stability_app, "--learning-rate", stability.learning_rate,
                                "optimizer learning rate");

    MseOpts mse;
    ConfigBinder mse_binder;
    CLI::App* mse_app =
        app.add_subcommand("mse-benchmark", "MSE benchmark against uLSIF and KLIEP");
    add_common(mse_app, mse_binder, mse.common);
    mse_binder.add_option(mse_app, "--dims", mse.dims, "data dimensions");
    mse_binder.add_option(mse_app, "--trials", mse.trials, "trials per dimension");
    mse_binder.add_option(mse_app, "--epochs", mse.epochs, "training epochs");
    mse_binder.add_option(mse_app, "--alpha", mse.alpha, "alpha for the alpha-divergence loss");

    ScalingOpts scaling;
    ConfigBinder scaling_binder;
    CLI::App* scaling_app =
        app.add_subcommand("scaling", "L1-error scaling over the training sample size");
    add_common(scaling_app, scaling_binder, scaling.common);
    scaling_binder.add_option(scaling_app, "--dim", scaling.dim, "data dimension");
    scaling_binder.add_option(scaling_app, "--sample-sizes", scaling.sample_sizes,
                              "training sample sizes K");
    scaling_binder.add_option(scaling_app, "--trials", scaling.trials, "trials per K");
    scaling_binder.add_flag(scaling_app, "--plug-in", scaling.plug_in,
                            "use the exact energy + finite-sample normalizer (no training)");
    scaling_binder.add_option(scaling_app, "--epochs", scaling.epochs, "training epochs");
    scaling_binder.add_option(scaling_app, "--alpha", scaling.alpha, "alpha for the loss");

    TrainOpts train_opts;
    ConfigBinder train_binder;
    CLI::App* train_app = app.add_subcommand("train", "train a ratio model");
    add_common(train_app, train_binder, train_opts.common);
    train_binder.add_option(train_app, "--p-csv", train_opts.p_csv, "P samples CSV");
    train_binder.add_option(train_app, "--q-csv", train_opts.q_csv, "Q samples CSV");
    train_binder.add_option(train_app, "--gen-dim", train_opts.gen_dim,
                            "generate Gaussian data of this dimension instead of reading CSVs");
    train_binder.add_option(train_app, "--gen-n", train_opts.gen_n, "generated samples per set");
    train_binder.add_option(train_app, "--gen-shift", train_opts.gen_shift,
                            "first-coordinate mean shift of Q");
    train_binder.add_option(train_app, "--gen-rho", train_opts.gen_rho,
                            "equicorrelation of the generated covariance");
    train_binder.add_option(train_app, "--hidden", train_opts.hidden,
                            "hidden layer sizes, comma separated");
    train_binder.add_option(train_app, "--loss", train_opts.loss,
                            "alpha-div, kl, reverse-kl, pearson-chi2, squared-hellinger, gan");
    train_binder.add_option(train_app, "--alpha", train_opts.alpha, "alpha for alpha-div");
    train_binder.add_option(train_app, "--optimizer", train_opts.optimizer, "adam or sgd");
    train_binder.add_option(train_app, "--learning-rate", train_opts.learning_rate,
                            "optimizer learning rate");
    train_binder.add_option(train_app, "--batch-size", train_opts.batch_size, "minibatch size");
    train_binder.add_option(train_app, "--epochs", train_opts.epochs, "training epochs");

    EstimateOpts estimate;
    ConfigBinder estimate_binder;
    CLI::App* estimate_app =
        app.add_subcommand("estimate", "predict ratios and estimate the divergence");
    add_common(estimate_app, estimate_binder, estimate.common);
    estimate_binder.add_option(estimate_app, "--model", estimate.model_file, "model JSON file");
    estimate_binder.add_option(estimate_app, "--points", estimate.points_file,
                               "P-side points CSV (gets per-point ratios)");
    estimate_binder.add_option(estimate_app, "--q-points", estimate.q_points_file,
                               "Q-side points CSV (enables the divergence estimate)");
    estimate_binder.add_option(estimate_app, "--alpha", estimate.alpha, "divergence order");

    ProbeOpts probe;
    ConfigBinder probe_binder;
    CLI::App* probe_app =
        app.add_subcommand("probe-gradients", "gradient regime diagnostic at an output level");
    add_common(probe_app, probe_binder, probe.common);
    probe_binder.add_option(probe_app, "--alpha", probe.alpha, "alpha for the loss");
    probe_binder.add_option(probe_app, "--t-const", probe.t_const, "output shift to probe at");
    probe_binder.add_option(probe_app, "--dim", probe.dim, "input dimension");
    probe_binder.add_option(probe_app, "--n", probe.n, "probe batch size");
    probe_binder.add_option(probe_app, "--hidden", probe.hidden, "hidden layer sizes");

    if (argc <= 1) {
        std::cerr << app.help() << std::endl;
        return 2;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (stability_app->parsed()) {
            finish_config(stability_app, stability_binder, stability.common);
            return cmd_stability(stability);
        }
        if (mse_app->parsed()) {
            finish_config(mse_app, mse_binder, mse.common);
            return cmd_mse_benchmark(mse);
        }
        if (scaling_app->parsed()) {
            finish_config(scaling_app, scaling_binder, scaling.common);
            return cmd_scaling(scaling);
        }
        if (train_app->parsed()) {
            finish_config(train_app, train_binder, train_opts.common);
            return cmd_train(train_opts);
        }
        if (estimate_app->parsed()) {
            finish_config(estimate_app, estimate_binder, estimate.common);
            return cmd_estimate(estimate);
        }
        if (probe_app->parsed()) {
            finish_config(probe_app, probe_binder, probe.common);
            return cmd_probe_gradients(probe);
        }
        std::cerr << app.help() << std::endl;
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
