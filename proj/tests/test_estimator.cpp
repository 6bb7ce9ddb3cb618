#include <gtest/gtest.h>

#include <cmath>

#include "dre/divergence.hpp"
#include "dre/experiments.hpp"
#include "dre/train.hpp"
#include "test_util.hpp"

using namespace dre;

namespace {

MlpModel constant_network(int dim, double c) {
    MlpModel net;
    net.layer_sizes = {dim, 1};
    net.weights.push_back(Matrix(1, dim));
    net.biases.push_back({c});
    return net;
}

}  // namespace

TEST(Train, ReachesTheBoundConstantAtEqualDistributions) {
    // P = Q = N(0, I_2): the population optimum of the 0.5-loss is 4.
    const auto spec = GaussianSpec::identity(2);
    const auto data_p = sample_mvn(spec, 500, 51, SourceLabel::P);
    const auto data_q = sample_mvn(spec, 500, 52, SourceLabel::Q);
    TrainConfig config;
    config.loss = LossKind::alpha_div(0.5);
    config.learning_rate = 1e-3;
    config.batch_size = 100;
    config.epochs = 50;
    config.seed = 7;
    const auto [model, trace] = train(data_p, data_q, {2, 32, 32, 1}, config);
    ASSERT_FALSE(trace.epoch_loss.empty());
    EXPECT_NEAR(trace.epoch_loss.back(), 4.0, 0.15);
    EXPECT_EQ(trace.steps(), 50 * 5);
}

TEST(Train, ZeroEpochsReturnsInitializedModel) {
    const auto spec = GaussianSpec::identity(2);
    const auto data_p = sample_mvn(spec, 50, 53, SourceLabel::P);
    const auto data_q = sample_mvn(spec, 50, 54, SourceLabel::Q);
    TrainConfig config;
    config.epochs = 0;
    config.seed = 9;
    const auto [model, trace] = train(data_p, data_q, {2, 8, 1}, config);
    EXPECT_TRUE(trace.step_loss.empty());
    const auto fresh = mlp_init({2, 8, 1}, derive_seed(config.seed, 0));
    for (std::size_t l = 0; l < fresh.weights.size(); ++l)
        EXPECT_EQ(model.network.weights[l].data, fresh.weights[l].data);
}

TEST(Train, DeterministicTraces) {
    const auto spec = GaussianSpec::identity(3);
    const auto data_p = sample_mvn(spec, 120, 55, SourceLabel::P);
    const auto data_q = sample_mvn(spec, 90, 56, SourceLabel::Q);
    TrainConfig config;
    config.batch_size = 32;
    config.epochs = 4;
    config.seed = 11;
    const auto run1 = train(data_p, data_q, {3, 8, 1}, config);
    const auto run2 = train(data_p, data_q, {3, 8, 1}, config);
    EXPECT_EQ(run1.second.step_loss, run2.second.step_loss);
    EXPECT_EQ(run1.first.normalizer, run2.first.normalizer);
}

TEST(Train, RejectsDimensionMismatch) {
    const auto data_p = sample_mvn(GaussianSpec::identity(2), 10, 1, SourceLabel::P);
    const auto data_q = sample_mvn(GaussianSpec::identity(3), 10, 2, SourceLabel::Q);
    EXPECT_THROW(train(data_p, data_q, {2, 4, 1}, TrainConfig{}), std::invalid_argument);
}

TEST(Train, EpochCountsPassOverLargerSet) {
    const auto spec = GaussianSpec::identity(2);
    const auto data_p = sample_mvn(spec, 100, 57, SourceLabel::P);
    const auto data_q = sample_mvn(spec, 40, 58, SourceLabel::Q);
    TrainConfig config;
    config.batch_size = 25;
    config.epochs = 3;
    const auto [model, trace] = train(data_p, data_q, {2, 4, 1}, config);
    EXPECT_EQ(trace.steps(), 3 * 4);  // ceil(100/25) steps per epoch
}

TEST(Normalize, ConstantNetworkGivesUnitRatio) {
    const auto net = constant_network(2, 3.0);
    const auto reference = sample_mvn(GaussianSpec::identity(2), 64, 59, SourceLabel::P);
    const auto model = normalize(net, reference);
    EXPECT_NEAR(model.normalizer, std::exp(-3.0), 1e-12);
    for (double r : predict_ratio(model, reference.data)) EXPECT_NEAR(r, 1.0, 1e-12);
}

TEST(Normalize, GridSearchOracleFindsLogNormalizer) {
    // Brute-force check of the optimal shift: with the Q-side expectation
    // taken under the Gibbs weighting exp(-T) of a held-out P sample (the
    // pairing for which the optimal-shift identity is exact), the argmin
    // over c of the shifted loss must sit at log(mean_p exp(-T)).
    const double alpha = 0.5;
    for (std::uint64_t seed : {61, 62, 63}) {
        const auto net = mlp_init({3, 16, 1}, seed);
        const auto holdout = sample_mvn(GaussianSpec::identity(3), 500, seed + 100, SourceLabel::P);
        const auto t = mlp_forward(net, holdout.data);
        const int n = holdout.size();

        std::vector<double> gibbs_weight(n);
        double weight_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            gibbs_weight[i] = std::exp(-t[i]);
            weight_sum += gibbs_weight[i];
        }

        auto shifted_loss = [&](double c) {
            double q_side = 0.0, p_side = 0.0;
            for (int i = 0; i < n; ++i) {
                q_side += gibbs_weight[i] * std::exp(alpha * (t[i] + c));
                p_side += std::exp((alpha - 1.0) * (t[i] + c));
            }
            return q_side / (alpha * weight_sum) + p_side / ((1.0 - alpha) * n);
        };

        const double target = std::log(normalize(net, holdout).normalizer);
        double best_c = 0.0, best_loss = std::numeric_limits<double>::infinity();
        for (double c = target - 0.5; c <= target + 0.5; c += 1e-3) {
            const double loss = shifted_loss(c);
            if (loss < best_loss) {
                best_loss = loss;
                best_c = c;
            }
        }
        EXPECT_NEAR(best_c, target, 1e-3 + 1e-9);
    }
}

TEST(Normalize, ExactEnergyNormalizerNearOne) {
    // T = T* makes exp(-T) the exact ratio, whose P-mean is 1.
    const std::vector<double> mu_p{0.0, 0.0}, mu_q{1.0, 0.0};
    const auto net = exact_energy_network(mu_p, mu_q);
    const int n = 100000;
    const auto reference = sample_mvn(GaussianSpec::identity(2, mu_p), n, 67, SourceLabel::P);
    const auto model = normalize(net, reference);
    const double se = std::sqrt((std::exp(1.0) - 1.0) / n);  // Var_P[r] = e - 1
    EXPECT_NEAR(model.normalizer, 1.0, 3.0 * se);
}

TEST(Normalize, SaturatedReferenceRejected) {
    const auto net = constant_network(2, -800.0);  // exp(800) clamps for every point
    const auto reference = sample_mvn(GaussianSpec::identity(2), 16, 69, SourceLabel::P);
    try {
        normalize(net, reference);
        FAIL() << "expected saturation error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("saturated"), std::string::npos);
    }
}

TEST(Normalize, Idempotent) {
    const auto net = mlp_init({2, 12, 1}, 71);
    const auto reference = sample_mvn(GaussianSpec::identity(2), 256, 73, SourceLabel::P);
    const auto model = normalize(net, reference);
    MlpModel shifted = net;
    shifted.biases.back()[0] += std::log(model.normalizer);
    const auto again = normalize(shifted, reference);
    EXPECT_NEAR(again.normalizer, 1.0, 1e-12);
}

TEST(PredictRatio, ConstantNetworkIsOne) {
    const auto net = constant_network(2, 5.0);
    const auto reference = sample_mvn(GaussianSpec::identity(2), 32, 75, SourceLabel::P);
    const auto model = normalize(net, reference);
    Matrix x(1, 2);
    x(0, 0) = 10.0;
    EXPECT_NEAR(predict_ratio(model, x)[0], 1.0, 1e-12);
}

TEST(PredictRatio, ExactEnergyRecoversRatioAtShiftPoint) {
    const std::vector<double> mu_p{0.0, 0.0}, mu_q{1.0, 0.0};
    const int n = 100000;
    const auto reference = sample_mvn(GaussianSpec::identity(2, mu_p), n, 77, SourceLabel::P);
    const auto model = normalize(exact_energy_network(mu_p, mu_q), reference);
    const double r_hat = predict_ratio_one(model, mu_q);
    const double se = std::sqrt((std::exp(1.0) - 1.0) / n);
    EXPECT_NEAR(r_hat, std::exp(0.5), std::exp(0.5) * 3.5 * se);
}

TEST(PredictRatio, ReferenceMeanIsExactlyOne) {
    const auto net = mlp_init({2, 10, 1}, 79);
    const auto reference = sample_mvn(GaussianSpec::identity(2), 100, 81, SourceLabel::P);
    const auto model = normalize(net, reference);
    const auto r = predict_ratio(model, reference.data);
    EXPECT_NEAR(mean(r), 1.0, 1e-13);
    for (double v : r) EXPECT_GT(v, 0.0);
    Matrix wrong(1, 3);
    EXPECT_THROW(predict_ratio(model, wrong), std::invalid_argument);
}

TEST(Validate, MatchesFinalTrainingLossOnTrainingData) {
    const auto spec = GaussianSpec::identity(2);
    const auto data_p = sample_mvn(spec, 100, 83, SourceLabel::P);
    const auto data_q = sample_mvn(spec, 100, 85, SourceLabel::Q);
    TrainConfig config;
    config.batch_size = 50;
    config.epochs = 5;
    config.seed = 3;
    const auto [model, trace] = train(data_p, data_q, {2, 8, 1}, config);
    EXPECT_DOUBLE_EQ(validate(model, data_p, data_q, 0.5), trace.epoch_loss.back());
}

TEST(Validate, ZeroNetworkAtEqualDistributionsGivesBound) {
    const auto net = constant_network(2, 0.0);
    const auto holdout = sample_mvn(GaussianSpec::identity(2), 64, 87, SourceLabel::P);
    RatioModel model;
    model.network = net;
    model.normalizer = 1.0;
    model.reference_size = holdout.size();
    EXPECT_DOUBLE_EQ(validate(model, holdout, holdout, 0.5), 4.0);
    EXPECT_THROW(validate(model, SampleSet{}, holdout, 0.5), std::invalid_argument);
}

TEST(MinibatchSum, EpochGradientSumMatchesFullBatch) {
    // With a zero learning rate the parameters never move, so the sum of
    // minibatch gradients over one epoch must equal the full-batch gradient
    // times the number of batches.
    const auto spec = GaussianSpec::identity(2);
    const auto data_p = sample_mvn(spec, 80, 89, SourceLabel::P);
    const auto data_q = sample_mvn(spec, 80, 91, SourceLabel::Q);
    const auto model = mlp_init({2, 8, 1}, 13);
    const LossKind kind = LossKind::alpha_div(0.5);

    const int batches = 4;
    const int size = 20;
    ParamGrads sum = zero_grads_like(model);
    for (int b = 0; b < batches; ++b) {
        Matrix bp(size, 2), bq(size, 2);
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < 2; ++j) {
                bp(i, j) = data_p.data(b * size + i, j);
                bq(i, j) = data_q.data(b * size + i, j);
            }
        accumulate(sum, network_loss_eval(model, bq, bp, kind).grads);
    }
    auto full = network_loss_eval(model, data_q.data, data_p.data, kind).grads;
    scale(full, static_cast<double>(batches));
    for (std::size_t l = 0; l < sum.weights.size(); ++l) {
        for (std::size_t i = 0; i < sum.weights[l].data.size(); ++i)
            EXPECT_NEAR(sum.weights[l].data[i], full.weights[l].data[i], 1e-10);
        for (std::size_t i = 0; i < sum.biases[l].size(); ++i)
            EXPECT_NEAR(sum.biases[l][i], full.biases[l][i], 1e-10);
    }
}

TEST(EstimateDivergence, ZeroCriticAtEqualDistributions) {
    const std::vector<double> zeros(100, 0.0);
    const auto est = estimate_divergence(zeros, zeros, 0.5);
    EXPECT_DOUBLE_EQ(est.d_hat, 0.0);
    EXPECT_DOUBLE_EQ(est.sigma_sq_moment, 0.0);
    EXPECT_EQ(est.n, 100);
}

TEST(EstimateDivergence, GaussianPairMatchesOracle) {
    const std::vector<double> mu_p{0.0, 0.0}, mu_q{1.0, 0.0};
    const int n = 100000;
    const auto xs_p = sample_mvn(GaussianSpec::identity(2, mu_p), n, 93, SourceLabel::P);
    const auto xs_q = sample_mvn(GaussianSpec::identity(2, mu_q), n, 95, SourceLabel::Q);
    std::vector<double> t_p(n), t_q(n);
    for (int i = 0; i < n; ++i) {
        t_p[i] = true_energy_gaussian(mu_p, mu_q, xs_p.data.row(i));
        t_q[i] = true_energy_gaussian(mu_p, mu_q, xs_q.data.row(i));
    }
    const auto est = estimate_divergence(t_q, t_p, 0.5);
    const double d_true = closed_form_alpha_div(mu_p, mu_q, 0.5);
    const double sigma_sq = 8.0 * (1.0 - std::exp(-0.25));  // 1.7695...
    EXPECT_NEAR(est.d_hat, d_true, 4.0 * std::sqrt(sigma_sq / n));
    EXPECT_NEAR(est.sigma_sq_moment, sigma_sq, 0.1);
    EXPECT_FALSE(std::isfinite(est.sigma_sq_paper));  // singular at alpha = 0.5
}

TEST(EstimateDivergence, BoundHoldsInsideUnitInterval) {
    Rng rng(15);
    for (int rep = 0; rep < 100; ++rep) {
        const double alpha = rng.uniform(0.05, 0.95);
        std::vector<double> t_q(20), t_p(20);
        for (double& t : t_q) t = rng.uniform(-5.0, 5.0);
        for (double& t : t_p) t = rng.uniform(-5.0, 5.0);
        const auto est = estimate_divergence(t_q, t_p, alpha);
        EXPECT_LE(est.d_hat, 1.0 / (alpha * (1.0 - alpha)));
        EXPECT_GE(est.sigma_sq_moment, 0.0);
    }
}

TEST(EstimateDivergence, PaperConstantFormDisagreesWithMomentForm) {
    // At P = Q with the exact critic both forms would ideally be 0; the
    // published constant form gives C5 > 0 instead. Reported, not hidden.
    const std::vector<double> zeros(50, 0.0);
    const auto est = estimate_divergence(zeros, zeros, 0.3);
    EXPECT_TRUE(std::isfinite(est.sigma_sq_paper));
    EXPECT_GT(est.sigma_sq_paper, 1.0);
    EXPECT_DOUBLE_EQ(est.sigma_sq_moment, 0.0);
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
}
