#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace {

Eigen::MatrixXd random_matrix(ovem::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.normal();
    }
    return m;
}

TEST(Linear, PredictExamples) {
    const ovem::LinearPredictor constant{Eigen::VectorXd::Zero(3), 2.5};
    const std::vector<double> x = {1.0, -4.0, 9.0};
    EXPECT_EQ(constant.predict(x), 2.5);
    const ovem::LinearPredictor p{Eigen::Vector2d(1.0, 2.0), 0.0};
    const std::vector<double> x2 = {3.0, 4.0};
    EXPECT_EQ(p.predict(x2), 11.0);
}

TEST(Linear, Additivity) {
    ovem::Rng rng(1);
    const ovem::LinearPredictor p{Eigen::Vector3d(0.3, -1.2, 2.0), 0.7};
    const std::vector<double> a = {rng.normal(), rng.normal(), rng.normal()};
    const std::vector<double> b = {rng.normal(), rng.normal(), rng.normal()};
    std::vector<double> sum(3);
    for (int j = 0; j < 3; ++j) {
        sum[j] = a[j] + b[j];
    }
    EXPECT_NEAR(p.predict(sum), p.predict(a) + p.predict(b) - p.intercept, 1e-14);
}

TEST(Linear, DimensionMismatch) {
    const ovem::LinearPredictor p{Eigen::Vector2d(1.0, 2.0), 0.0};
    const std::vector<double> x = {1.0};
    EXPECT_THROW(p.predict(x), ovem::Error);
}

TEST(LinearMStep, InterceptOnlyIsTargetMean) {
    const Eigen::MatrixXd x(2, 0);
    const auto p = ovem::linear_mstep(x, Eigen::Vector2d(2.0, 4.0), 0.0, 1.0);
    EXPECT_NEAR(p.intercept, 3.0, 1e-14);
}

TEST(LinearMStep, HugePenaltyLeavesInterceptAtMean) {
    ovem::Rng rng(2);
    const Eigen::MatrixXd x = random_matrix(rng, 40, 3);
    const Eigen::VectorXd t = random_matrix(rng, 40, 1);
    const auto p = ovem::linear_mstep(x, t, 1e12, 1.0);
    EXPECT_LT(p.weights.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(p.intercept, t.mean(), 1e-9);
}

TEST(LinearMStep, MatchesQrOracleAndNormalEquations) {
    ovem::Rng rng(3);
    const Eigen::MatrixXd x = random_matrix(rng, 50, 5);
    const Eigen::VectorXd t = random_matrix(rng, 50, 1);
    for (double lambda : {0.0, 1e-3, 0.5, 20.0}) {
        const double sigma = 0.7;
        const auto p = ovem::linear_mstep(x, t, lambda, sigma);
        const Eigen::VectorXd want = oracle::ridge_qr(x, t, lambda, sigma);
        EXPECT_LE((p.weights - want.head(5)).norm(), 1e-10 * want.norm());
        EXPECT_NEAR(p.intercept, want(5), 1e-10 * want.norm());

        Eigen::MatrixXd xa(50, 6);
        xa << x, Eigen::VectorXd::Ones(50);
        Eigen::VectorXd theta(6);
        theta << p.weights, p.intercept;
        Eigen::VectorXd pen = lambda * sigma * sigma * theta;
        pen(5) = 0.0;
        const Eigen::VectorXd residual = xa.transpose() * (xa * theta - t) + pen;
        EXPECT_LE(residual.norm(), 1e-10 * (xa.transpose() * t).norm());
    }
}

TEST(LinearMStep, SingularDesignWithoutPenalty) {
    Eigen::MatrixXd x(4, 2);
    x << 1, 2, 2, 4, 3, 6, 4, 8;
    try {
        ovem::linear_mstep(x, Eigen::Vector4d(1, 2, 3, 4), 0.0, 1.0);
        FAIL();
    } catch (const ovem::Error& e) {
        EXPECT_EQ(e.kind(), ovem::ErrorKind::singular_system);
    }
}

TEST(LinearMStep, ArgumentErrors) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
    EXPECT_THROW(ovem::linear_mstep(x, Eigen::Vector3d(1, 2, 3), -1.0, 1.0), ovem::Error);
    EXPECT_THROW(ovem::linear_mstep(x, Eigen::Vector3d(1, 2, 3), 1.0, 0.0), ovem::Error);
    EXPECT_THROW(ovem::linear_mstep(x, Eigen::Vector2d(1, 2), 1.0, 1.0), ovem::Error);
}

TEST(KernelGram, Examples) {
    Eigen::MatrixXd a(1, 1);
    a << 1.0;
    Eigen::MatrixXd b(1, 1);
    b << 2.0;
    EXPECT_EQ(ovem::kernel_gram(a, b, 2)(0, 0), 9.0);
    ovem::Rng rng(4);
    const Eigen::MatrixXd x = random_matrix(rng, 6, 3);
    const Eigen::MatrixXd x2 = random_matrix(rng, 4, 3);
    const Eigen::MatrixXd k = ovem::kernel_gram(x, x2, 1);
    EXPECT_EQ(k.rows(), 4);
    EXPECT_EQ(k.cols(), 6);
    EXPECT_LE((k - (x2 * x.transpose()).array().matrix() - Eigen::MatrixXd::Ones(4, 6)).norm(), 1e-13);
    const Eigen::MatrixXd k3 = ovem::kernel_gram(x, x2, 3);
    EXPECT_NEAR(k3(2, 5), std::pow(x2.row(2).dot(x.row(5)) + 1.0, 3), 1e-12);
}

TEST(KernelGram, PositiveSemidefinite) {
    ovem::Rng rng(5);
    const Eigen::MatrixXd x = random_matrix(rng, 30, 4);
    for (int degree : {1, 2, 4}) {
        Eigen::MatrixXd k = ovem::kernel_gram(x, x, degree);
        EXPECT_LE((k - k.transpose()).norm(), 1e-12 * k.norm());
        k.diagonal().array() += 1e-10 * k.diagonal().maxCoeff();
        EXPECT_NO_THROW(ovem::SpdFactor{k});
    }
}

TEST(KernelGram, Errors) {
    EXPECT_THROW(ovem::kernel_gram(Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(2, 3), 2), ovem::Error);
    EXPECT_THROW(ovem::kernel_gram(Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(2, 2), 0), ovem::Error);
}

TEST(KernelMStep, IdentityGram) {
    const Eigen::VectorXd t = Eigen::Vector3d(1.0, -2.0, 4.0);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
    EXPECT_LE((ovem::kernel_mstep(eye, t, 1e-12, 1.0) - t).norm(), 1e-11);
    EXPECT_LE((ovem::kernel_mstep(eye, t, 1.0, 1.0) - t / 2.0).norm(), 1e-15);
}

TEST(KernelMStep, Residual) {
    ovem::Rng rng(6);
    const Eigen::MatrixXd x = random_matrix(rng, 40, 3);
    const Eigen::MatrixXd k = ovem::kernel_gram(x, x, 2);
    const Eigen::VectorXd t = random_matrix(rng, 40, 1);
    const double lambda = 0.1;
    const double sigma = 0.5;
    const Eigen::VectorXd alpha = ovem::kernel_mstep(k, t, lambda, sigma);
    const Eigen::VectorXd residual = k * alpha + lambda * sigma * sigma * alpha - t;
    EXPECT_LE(residual.norm(), 1e-10 * t.norm() * std::max(1.0, k.norm()));
}

TEST(KernelPredictor, MatchesGramProduct) {
    ovem::Rng rng(7);
    const Eigen::MatrixXd x = random_matrix(rng, 10, 2);
    const ovem::KernelPredictor p{random_matrix(rng, 10, 1), x, 3};
    const Eigen::MatrixXd q = random_matrix(rng, 5, 2);
    const Eigen::VectorXd all = p.predict(q);
    for (Eigen::Index i = 0; i < 5; ++i) {
        const std::vector<double> row = {q(i, 0), q(i, 1)};
        EXPECT_NEAR(p.predict(row), all(i), 1e-12 * std::max(1.0, std::abs(all(i))));
    }
}

TEST(Neural, ZeroFirstLayerOutputsZero) {
    ovem::NeuralPredictor p{Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(4), Eigen::RowVectorXd::Ones(4)};
    const std::vector<double> x = {5.0, -2.0, 1.0};
    EXPECT_EQ(p.predict(x), 0.0);
}

TEST(Neural, SaturatedUnit) {
    ovem::NeuralPredictor p{Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Zero(1), Eigen::RowVectorXd::Ones(1)};
    p.w1(0, 0) = 1.0;
    const std::vector<double> x = {50.0, 0.0, 0.0};
    EXPECT_NEAR(p.predict(x), 1.0, 1e-15);
}

TEST(Neural, HiddenBiasShiftsOutput) {
    ovem::NeuralPredictor p{Eigen::MatrixXd::Zero(2, 1), Eigen::Vector2d(0.5, -1.0), Eigen::RowVector2d(2.0, 1.0)};
    const std::vector<double> x = {3.0};
    EXPECT_NEAR(p.predict(x), 2.0 * std::tanh(0.5) + std::tanh(-1.0), 1e-15);
    EXPECT_EQ(p.penalty(), 5.0);
}

TEST(Neural, OutputBoundedByOutputWeights) {
    ovem::Rng rng(12);
    auto p = ovem::init_neural(3, 4, 5);
    p.w1 *= 10.0;
    p.b1 = Eigen::Vector4d(3.0, -2.0, 0.5, 9.0);
    const Eigen::MatrixXd x = random_matrix(rng, 200, 3) * 5.0;
    EXPECT_LE(p.predict(x).cwiseAbs().maxCoeff(), p.w2.cwiseAbs().sum());
}

TEST(Neural, InitIsSeededAndBounded) {
    const auto a = ovem::init_neural(5, 7, 42);
    const auto b = ovem::init_neural(5, 7, 42);
    EXPECT_EQ(a.w1, b.w1);
    EXPECT_EQ(a.w2, b.w2);
    EXPECT_LE(a.w1.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(5.0));
    EXPECT_LE(a.w2.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(7.0));
    EXPECT_THROW(ovem::init_neural(0, 3, 1), ovem::Error);
}

TEST(Neural, GradientMatchesFiniteDifferences) {
    ovem::Rng rng(8);
    for (int setting = 0; setting < 5; ++setting) {
        auto p = ovem::init_neural(4, 6, 100 + setting);
        p.w1 *= 2.0;
        p.b1 = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
        const Eigen::MatrixXd x = random_matrix(rng, 25, 4);
        const Eigen::VectorXd t = random_matrix(rng, 25, 1);
        const double lambda = 0.3;
        const double sigma = 0.8;
        const auto g = ovem::neural_loss_gradient(p, x, t, lambda, sigma);
        for (Eigen::Index i = 0; i < 6; ++i) {
            for (Eigen::Index j = 0; j < 4; ++j) {
                const double fd = oracle::neural_loss_fd(p, x, t, lambda, sigma, oracle::Layer::w1, i, j, 1e-5);
                EXPECT_NEAR(g.w1(i, j), fd, 1e-5 * std::max({std::abs(fd), std::abs(g.w1(i, j)), 1e-3}));
            }
            const double fb = oracle::neural_loss_fd(p, x, t, lambda, sigma, oracle::Layer::b1, i, 0, 1e-5);
            EXPECT_NEAR(g.b1(i), fb, 1e-5 * std::max({std::abs(fb), std::abs(g.b1(i)), 1e-3}));
            const double fd = oracle::neural_loss_fd(p, x, t, lambda, sigma, oracle::Layer::w2, i, 0, 1e-5);
            EXPECT_NEAR(g.w2(i), fd, 1e-5 * std::max({std::abs(fd), std::abs(g.w2(i)), 1e-3}));
        }
    }
}

TEST(NeuralMStep, ZeroEpochsReturnsStart) {
    ovem::Rng data_rng(9);
    const auto data = oracle::random_dataset(data_rng, 30, 3);
    const auto start = ovem::init_neural(3, 5, 1);
    ovem::SgdConfig cfg;
    cfg.epochs_per_mstep = 0;
    ovem::Rng rng(1);
    const auto out = ovem::neural_mstep(start, data.feature_matrix(), data.highest_bids(), 0.1, 1.0, cfg, data, rng);
    EXPECT_EQ(out.w1, start.w1);
    EXPECT_EQ(out.b1, start.b1);
    EXPECT_EQ(out.w2, start.w2);
}

TEST(NeuralMStep, TrainingLossDecreasesOnLinearTarget) {
    ovem::Rng rng(10);
    const Eigen::MatrixXd x = random_matrix(rng, 400, 3);
    const Eigen::VectorXd t = x * Eigen::Vector3d(0.5, -0.3, 0.2) + Eigen::VectorXd::Constant(400, 1.5);
    ovem::Dataset holdout(3);
    for (Eigen::Index i = 0; i < 100; ++i) {
        const double high = std::abs(t(i)) + 0.05;
        holdout.push_back({{x(i, 0), x(i, 1), x(i, 2)}, high, 0.5 * high});
    }
    const auto start = ovem::init_neural(3, 5, 3);
    ovem::SgdConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs_per_mstep = 30;
    cfg.patience = 30;
    ovem::Rng sgd(4);
    const auto out = ovem::neural_mstep(start, x, t, 1e-4, 0.1, cfg, holdout, sgd);
    EXPECT_LT(ovem::neural_loss(out, x, t, 1e-4, 0.1), 0.5 * ovem::neural_loss(start, x, t, 1e-4, 0.1));
}

TEST(NeuralMStep, DivergenceIsReported) {
    ovem::Rng rng(11);
    const auto data = oracle::random_dataset(rng, 50, 2);
    ovem::SgdConfig cfg;
    cfg.learning_rate = 1e200;
    cfg.epochs_per_mstep = 3;
    ovem::Rng sgd(1);
    try {
        ovem::neural_mstep(ovem::init_neural(2, 3, 1), data.feature_matrix(), data.highest_bids(), 0.0, 1.0, cfg,
                           data, sgd);
        FAIL();
    } catch (const ovem::Error& e) {
        EXPECT_EQ(e.kind(), ovem::ErrorKind::non_finite);
    }
}

} // namespace
