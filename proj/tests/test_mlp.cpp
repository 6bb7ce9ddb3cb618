#include <gtest/gtest.h>

#include <cmath>

#include "dre/mlp.hpp"
#include "dre/optimizer.hpp"
#include "dre/serialize.hpp"
#include "test_util.hpp"

using namespace dre;
using dre::testing::finite_difference_grads;
using dre::testing::max_grad_rel_error;
using dre::testing::random_batch;

TEST(MlpInit, PaperArchitecture) {
    const auto model = mlp_init({5, 100, 100, 100, 100, 1}, 42);
    ASSERT_EQ(model.num_layers(), 5);
    for (int l = 1; l <= 4; ++l) EXPECT_EQ(model.layer_sizes[l], 100);
    EXPECT_EQ(model.weights[0].rows, 100);
    EXPECT_EQ(model.weights[0].cols, 5);
    for (const auto& b : model.biases)
        for (double x : b) EXPECT_EQ(x, 0.0);
}

TEST(MlpInit, DegenerateAffine) {
    const auto model = mlp_init({1, 1}, 0);
    ASSERT_EQ(model.num_layers(), 1);
    EXPECT_EQ(model.biases[0][0], 0.0);
}

TEST(MlpInit, DeterministicForFixedSeed) {
    const auto a = mlp_init({3, 8, 1}, 7);
    const auto b = mlp_init({3, 8, 1}, 7);
    for (std::size_t l = 0; l < a.weights.size(); ++l)
        EXPECT_EQ(a.weights[l].data, b.weights[l].data);
    const auto c = mlp_init({3, 8, 1}, 8);
    EXPECT_NE(a.weights[0].data, c.weights[0].data);
}

TEST(MlpInit, RejectsBadSizes) {
    EXPECT_THROW(mlp_init({5}, 0), std::invalid_argument);
    EXPECT_THROW(mlp_init({5, 0, 1}, 0), std::invalid_argument);
    EXPECT_THROW(mlp_init({5, 4, 2}, 0), std::invalid_argument);
}

TEST(MlpInit, WeightsWithinHeBound) {
    const auto model = mlp_init({4, 16, 1}, 3);
    const double bound0 = std::sqrt(6.0 / 4);
    for (double w : model.weights[0].data) EXPECT_LE(std::abs(w), bound0);
    const double bound1 = std::sqrt(6.0 / 16);
    for (double w : model.weights[1].data) EXPECT_LE(std::abs(w), bound1);
}

TEST(MlpForward, ZeroModelMapsToZero) {
    MlpModel model;
    model.layer_sizes = {3, 4, 1};
    model.weights = {Matrix(4, 3), Matrix(1, 4)};
    model.biases = {{0, 0, 0, 0}, {0}};
    Rng rng(1);
    const auto out = mlp_forward(model, random_batch(6, 3, rng));
    for (double t : out) EXPECT_EQ(t, 0.0);
}

TEST(MlpForward, HandComputedReluPath) {
    // Hidden weights (1, -1), second layer sums both hidden units.
    MlpModel model;
    model.layer_sizes = {1, 2, 1};
    model.weights = {Matrix(2, 1), Matrix(1, 2)};
    model.weights[0](0, 0) = 1.0;
    model.weights[0](1, 0) = -1.0;
    model.weights[1](0, 0) = 1.0;
    model.weights[1](0, 1) = 1.0;
    model.biases = {{0, 0}, {0}};

    Matrix x(2, 1);
    x(0, 0) = 3.0;
    x(1, 0) = -3.0;
    const auto out = mlp_forward(model, x);
    EXPECT_DOUBLE_EQ(out[0], 3.0);  // hidden (3,-3) -> relu (3,0) -> 3
    EXPECT_DOUBLE_EQ(out[1], 3.0);  // hidden (-3,3) -> relu (0,3) -> 3
}

TEST(MlpForward, DeterministicAndRowIndependent) {
    const auto model = mlp_init({4, 10, 10, 1}, 11);
    Rng rng(2);
    const Matrix batch = random_batch(8, 4, rng);
    const auto out1 = mlp_forward(model, batch);
    const auto out2 = mlp_forward(model, batch);
    EXPECT_EQ(out1, out2);
    // Row i depends only on row i.
    Matrix single(1, 4);
    for (int j = 0; j < 4; ++j) single(0, j) = batch(5, j);
    EXPECT_EQ(mlp_forward(model, single)[0], out1[5]);
}

TEST(MlpForward, RejectsDimensionMismatch) {
    const auto model = mlp_init({4, 8, 1}, 0);
    EXPECT_THROW(mlp_forward(model, Matrix(3, 5)), std::invalid_argument);
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGrads) {
    const auto model = mlp_init({3, 6, 1}, 5);
    Rng rng(3);
    const Matrix batch = random_batch(4, 3, rng);
    const std::vector<double> upstream(4, 0.0);
    const auto grads = mlp_backward(model, batch, upstream);
    EXPECT_EQ(grad_norm(grads), 0.0);
}

TEST(MlpBackward, AffineMapHandGradient) {
    // T(x) = w x + b: dT/dw = x, dT/db = 1.
    auto model = mlp_init({1, 1}, 0);
    model.weights[0](0, 0) = 1.7;
    model.biases[0][0] = -0.3;
    Matrix x(1, 1);
    x(0, 0) = 2.5;
    const auto grads = mlp_backward(model, x, std::vector<double>{1.0});
    EXPECT_DOUBLE_EQ(grads.weights[0](0, 0), 2.5);
    EXPECT_DOUBLE_EQ(grads.biases[0][0], 1.0);
}

TEST(MlpBackward, MatchesFiniteDifferences) {
    // Architectures up to [3,8,8,1], 20 seeds total, rel error < 1e-5.
    const std::vector<std::vector<int>> archs = {
        {1, 1}, {2, 4, 1}, {3, 8, 8, 1}, {2, 5, 5, 1}, {3, 8, 1}};
    int seed = 0;
    for (const auto& arch : archs) {
        for (int rep = 0; rep < 4; ++rep, ++seed) {
            const auto model = mlp_init(arch, 100 + seed);
            Rng rng(200 + seed);
            const Matrix batch = random_batch(5, arch.front(), rng);
            std::vector<double> upstream(5);
            for (double& u : upstream) u = rng.normal();

            const auto analytic = mlp_backward(model, batch, upstream);
            const auto fd = finite_difference_grads(model, [&](const MlpModel& m) {
                const auto t = mlp_forward(m, batch);
                double s = 0.0;
                for (std::size_t i = 0; i < t.size(); ++i) s += upstream[i] * t[i];
                return s;
            });
            EXPECT_LT(max_grad_rel_error(analytic, fd), 1e-5)
                << "arch index mismatch at seed " << seed;
        }
    }
}

TEST(MlpBackward, RejectsShapeMismatch) {
    const auto model = mlp_init({3, 4, 1}, 0);
    Rng rng(4);
    const Matrix batch = random_batch(4, 3, rng);
    EXPECT_THROW(mlp_backward(model, batch, std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST(Optimizer, SgdIsExactElementwise) {
    auto model = mlp_init({1, 1}, 0);
    model.weights[0](0, 0) = 1.0;
    auto state = optimizer_init(OptimizerKind::Sgd, 0.1, model);
    auto grads = zero_grads_like(model);
    grads.weights[0](0, 0) = 2.0;
    optimizer_step(state, model, grads);
    EXPECT_DOUBLE_EQ(model.weights[0](0, 0), 0.8);
    EXPECT_EQ(state.step_count, 1);
}

TEST(Optimizer, ZeroGradientIsFixedPoint) {
    for (auto kind : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
        auto model = mlp_init({2, 4, 1}, 9);
        const auto before = model;
        auto state = optimizer_init(kind, 0.05, model);
        optimizer_step(state, model, zero_grads_like(model));
        for (std::size_t l = 0; l < model.weights.size(); ++l)
            EXPECT_EQ(model.weights[l].data, before.weights[l].data);
    }
}

TEST(Optimizer, AdamFirstStepBiasCorrected) {
    // First step with g=10: update is lr * g / (|g| + eps) ~ lr.
    auto model = mlp_init({1, 1}, 0);
    model.weights[0](0, 0) = 0.0;
    auto state = optimizer_init(OptimizerKind::Adam, 0.001, model);
    auto grads = zero_grads_like(model);
    grads.weights[0](0, 0) = 10.0;
    optimizer_step(state, model, grads);
    EXPECT_NEAR(model.weights[0](0, 0), -0.001 * 10.0 / (10.0 + 1e-8), 1e-12);
}

TEST(Optimizer, RejectsNonFiniteGradsNamingLayer) {
    auto model = mlp_init({2, 3, 1}, 0);
    auto state = optimizer_init(OptimizerKind::Adam, 0.001, model);
    auto grads = zero_grads_like(model);
    grads.weights[1](0, 0) = std::numeric_limits<double>::infinity();
    try {
        optimizer_step(state, model, grads);
        FAIL() << "expected rejection";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
    }
}

TEST(MlpSerialize, JsonRoundTripReproducesForward) {
    const auto model = mlp_init({4, 12, 12, 1}, 21);
    const auto reloaded = mlp_from_json(mlp_to_json(model));
    Rng rng(6);
    const Matrix batch = random_batch(16, 4, rng);
    const auto a = mlp_forward(model, batch);
    const auto b = mlp_forward(reloaded, batch);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double rel = std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i]));
        EXPECT_LT(rel, 1e-12);
    }
}

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    return RUN_ALL_TESTS();
}
