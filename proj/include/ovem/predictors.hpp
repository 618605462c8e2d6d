#pragma once

// Reserve-price mechanisms f(x; w) and their M-steps: ridge regression with an
// unpenalized intercept, polynomial-kernel regression in the dual, and a
// one-hidden-layer tanh network trained by mini-batch gradient descent.

#include "ovem/auction.hpp"
#include "ovem/error.hpp"
#include "ovem/numerics.hpp"
#include "ovem/posterior.hpp"
#include "ovem/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ovem {

namespace detail {

inline Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
    return {x.data(), static_cast<Eigen::Index>(x.size())};
}

inline void check_hyper(double lambda, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorKind::invalid_sigma, "sigma must be positive and finite");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorKind::invalid_argument, "lambda must be non-negative and finite");
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Linear

struct LinearPredictor {
    Eigen::VectorXd weights;
    double intercept = 0.0;

    std::size_t dim() const { return static_cast<std::size_t>(weights.size()); }

    double predict(std::span<const double> x) const {
        if (x.size() != dim()) {
            throw Error(ErrorKind::dimension_mismatch, "linear predictor expects " + std::to_string(dim()) +
                                                           " features, got " + std::to_string(x.size()));
        }
        return weights.dot(detail::as_vector(x)) + intercept;
    }

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
        if (static_cast<std::size_t>(x.cols()) != dim()) {
            throw Error(ErrorKind::dimension_mismatch, "feature matrix has wrong column count");
        }
        return (x * weights).array() + intercept;
    }

    /// Squared norm of the penalized parameters (the intercept is not penalized).
    double penalty() const { return weights.squaredNorm(); }
};

/// Ridge M-step with a fixed design matrix: the system matrix is factored once
/// and reused for every set of targets.
///
/// Solves (lambda I' + Xa^T Xa / sigma^2) theta = Xa^T t / sigma^2 where Xa is X
/// with a trailing column of ones and I' is the identity with a zero in the
/// intercept slot. Both sides are scaled by sigma^2 before factoring.
class LinearMStep {
public:
    LinearMStep(const Eigen::MatrixXd& x, double lambda, double sigma) : design_(x.rows(), x.cols() + 1) {
        detail::check_hyper(lambda, sigma);
        if (x.rows() == 0) {
            throw Error(ErrorKind::empty_dataset, "ridge M-step needs at least one row");
        }
        design_.leftCols(x.cols()) = x;
        design_.col(x.cols()).setOnes();
        Eigen::MatrixXd normal = design_.transpose() * design_;
        normal.diagonal().head(x.cols()).array() += lambda * sigma * sigma;
        try {
            factor_.emplace(normal);
        } catch (const Error& e) {
            throw Error(ErrorKind::singular_system, e.what());
        }
    }

    LinearPredictor operator()(const Eigen::VectorXd& targets) const {
        if (targets.size() != design_.rows()) {
            throw Error(ErrorKind::length_mismatch, "targets do not match design rows");
        }
        const Eigen::VectorXd theta = factor_->solve(design_.transpose() * targets);
        const auto d = design_.cols() - 1;
        return {theta.head(d), theta(d)};
    }

private:
    Eigen::MatrixXd design_;
    std::optional<SpdFactor> factor_;
};

inline LinearPredictor linear_mstep(const Eigen::MatrixXd& x, const Eigen::VectorXd& targets, double lambda,
                                    double sigma) {
    return LinearMStep(x, lambda, sigma)(targets);
}

// ---------------------------------------------------------------------------
// Polynomial kernel

/// Entry (i, j) is (x2_i . x_j + 1)^degree; the result is rows(x2) x rows(x).
inline Eigen::MatrixXd kernel_gram(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x2, int degree) {
    if (x.cols() != x2.cols()) {
        throw Error(ErrorKind::dimension_mismatch, "kernel inputs have different feature counts");
    }
    if (degree < 1) {
        throw Error(ErrorKind::invalid_argument, "kernel degree must be >= 1");
    }
    Eigen::MatrixXd k = x2 * x.transpose();
    k.array() += 1.0;
    if (degree > 1) {
        const Eigen::ArrayXXd base = k.array();
        for (int p = 1; p < degree; ++p) {
            k.array() *= base;
        }
    }
    return k;
}

struct KernelPredictor {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd train_features;
    int degree = 2;

    std::size_t dim() const { return static_cast<std::size_t>(train_features.cols()); }

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
        if (static_cast<std::size_t>(x.cols()) != dim()) {
            throw Error(ErrorKind::dimension_mismatch, "feature matrix has wrong column count");
        }
        return kernel_gram(train_features, x, degree) * alpha;
    }

    double predict(std::span<const double> x) const {
        if (x.size() != dim()) {
            throw Error(ErrorKind::dimension_mismatch, "kernel predictor expects " + std::to_string(dim()) +
                                                           " features, got " + std::to_string(x.size()));
        }
        const Eigen::MatrixXd row = detail::as_vector(x).transpose();
        return predict(row)(0);
    }
};

/// Dual M-step: alpha = (K / sigma^2 + lambda I)^{-1} t / sigma^2, computed as
/// (K + lambda sigma^2 I)^{-1} t with the factor cached across calls.
class KernelMStep {
public:
    KernelMStep(const Eigen::MatrixXd& gram, double lambda, double sigma) {
        detail::check_hyper(lambda, sigma);
        Eigen::MatrixXd system = gram;
        system.diagonal().array() += lambda * sigma * sigma;
        factor_.emplace(system);
    }

    Eigen::VectorXd operator()(const Eigen::VectorXd& targets) const {
        if (targets.size() != factor_->size()) {
            throw Error(ErrorKind::length_mismatch, "targets do not match Gram size");
        }
        return factor_->solve(targets);
    }

private:
    std::optional<SpdFactor> factor_;
};

inline Eigen::VectorXd kernel_mstep(const Eigen::MatrixXd& gram, const Eigen::VectorXd& targets, double lambda,
                                    double sigma) {
    return KernelMStep(gram, lambda, sigma)(targets);
}

// ---------------------------------------------------------------------------
// Neural network: f(x) = w2 . tanh(W1 x + b1). The hidden bias b1 plays the
// role of the linear model's intercept and, like it, is not penalized.

struct NeuralPredictor {
    Eigen::MatrixXd w1;    // H x d
    Eigen::VectorXd b1;    // H
    Eigen::RowVectorXd w2; // 1 x H

    std::size_t dim() const { return static_cast<std::size_t>(w1.cols()); }
    std::size_t hidden_units() const { return static_cast<std::size_t>(w1.rows()); }

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
        if (static_cast<std::size_t>(x.cols()) != dim()) {
            throw Error(ErrorKind::dimension_mismatch, "feature matrix has wrong column count");
        }
        return hidden(x) * w2.transpose();
    }

    /// N x H hidden activations.
    Eigen::MatrixXd hidden(const Eigen::MatrixXd& x) const {
        return ((x * w1.transpose()).rowwise() + b1.transpose()).array().tanh();
    }

    double predict(std::span<const double> x) const {
        if (x.size() != dim()) {
            throw Error(ErrorKind::dimension_mismatch, "neural predictor expects " + std::to_string(dim()) +
                                                           " features, got " + std::to_string(x.size()));
        }
        const Eigen::VectorXd h = (w1 * detail::as_vector(x) + b1).array().tanh();
        return w2.dot(h);
    }

    double penalty() const { return w1.squaredNorm() + w2.squaredNorm(); }

    bool finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite(); }
};

/// Uniform initialisation on [-1/sqrt(d), 1/sqrt(d)] for W1 and [-1/sqrt(H), 1/sqrt(H)] for w2; b1 = 0.
inline NeuralPredictor init_neural(std::size_t dim, std::size_t hidden_units, std::uint64_t seed) {
    if (dim == 0 || hidden_units == 0) {
        throw Error(ErrorKind::invalid_argument, "network needs dim >= 1 and hidden_units >= 1");
    }
    Rng rng(seed);
    NeuralPredictor p;
    p.w1.resize(static_cast<Eigen::Index>(hidden_units), static_cast<Eigen::Index>(dim));
    p.b1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden_units));
    p.w2.resize(static_cast<Eigen::Index>(hidden_units));
    const double r1 = 1.0 / std::sqrt(static_cast<double>(dim));
    const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden_units));
    for (Eigen::Index i = 0; i < p.w1.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.w1.cols(); ++j) {
            p.w1(i, j) = rng.uniform(-r1, r1);
        }
    }
    for (Eigen::Index i = 0; i < p.w2.size(); ++i) {
        p.w2(i) = rng.uniform(-r2, r2);
    }
    return p;
}

struct NeuralGradient {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::RowVectorXd w2;
};

/// M-step loss sum_i (f(x_i) - t_i)^2 / (2 sigma^2) + (lambda / 2) (|W1|^2 + |w2|^2).
inline double neural_loss(const NeuralPredictor& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
                          double lambda, double sigma) {
    const Eigen::VectorXd residual = p.predict(x) - targets;
    return residual.squaredNorm() / (2.0 * sigma * sigma) + 0.5 * lambda * p.penalty();
}

/// Backpropagated gradient of neural_loss.
inline NeuralGradient neural_loss_gradient(const NeuralPredictor& p, const Eigen::MatrixXd& x,
                                           const Eigen::VectorXd& targets, double lambda, double sigma) {
    const Eigen::MatrixXd hidden = p.hidden(x); // N x H
    const Eigen::VectorXd residual = (hidden * p.w2.transpose() - targets) / (sigma * sigma);
    NeuralGradient g;
    g.w2 = residual.transpose() * hidden + lambda * p.w2;
    const Eigen::MatrixXd delta =
        (residual * p.w2).array() * (1.0 - hidden.array().square()); // N x H
    g.w1 = delta.transpose() * x + lambda * p.w1;
    g.b1 = delta.colwise().sum().transpose();
    return g;
}

struct SgdConfig {
    double learning_rate = 1e-2;
    std::size_t batch_size = 32;
    std::size_t epochs_per_mstep = 1;
    std::size_t patience = 5;
    std::uint64_t seed = 0;
};

/// Sum over the holdout auctions of ln(C_i e^{B_i}) - B_i at the network's predictions.
inline double holdout_smoothed_revenue(const NeuralPredictor& p, const Eigen::MatrixXd& x, const Dataset& holdout,
                                       double sigma) {
    const Eigen::VectorXd means = p.predict(x);
    double total = 0.0;
    for (std::size_t i = 0; i < holdout.size(); ++i) {
        const auto& r = holdout[i];
        total += log_normalizer(means(static_cast<Eigen::Index>(i)), sigma, r.highest_bid, r.second_bid) -
                 r.highest_bid;
    }
    return total;
}

/// Mini-batch gradient descent on neural_loss starting from `start` (warm start).
///
/// Each step moves along -lr * (sigma^2 / N) * grad, i.e. the gradient of the
/// loss rescaled to a per-example average, so the learning rate keeps its
/// meaning across sigma and N. After every epoch the holdout smoothed revenue
/// is measured; training stops after `patience` epochs without improvement and
/// the best parameters seen (including `start`) are returned.
inline NeuralPredictor neural_mstep(const NeuralPredictor& start, const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& targets, double lambda, double sigma,
                                    const SgdConfig& cfg, const Dataset& holdout, Rng& rng) {
    detail::check_hyper(lambda, sigma);
    if (!(cfg.learning_rate > 0.0) || cfg.batch_size == 0 || cfg.patience == 0) {
        throw Error(ErrorKind::invalid_argument, "SGD config needs positive learning rate, batch size and patience");
    }
    if (targets.size() != x.rows()) {
        throw Error(ErrorKind::length_mismatch, "targets do not match feature rows");
    }
    if (cfg.epochs_per_mstep == 0) {
        return start;
    }
    if (holdout.empty()) {
        throw Error(ErrorKind::empty_dataset, "neural M-step needs a holdout set");
    }
    const Eigen::MatrixXd holdout_x = holdout.feature_matrix();
    const auto n = static_cast<std::size_t>(x.rows());
    const double decay = lambda * sigma * sigma / static_cast<double>(n);

    NeuralPredictor current = start;
    NeuralPredictor best = start;
    double best_score = holdout_smoothed_revenue(start, holdout_x, holdout, sigma);
    std::size_t stale = 0;

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs_per_mstep; ++epoch) {
        rng.shuffle(order);
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            const auto rows = static_cast<Eigen::Index>(end - begin);
            Eigen::MatrixXd xb(rows, x.cols());
            Eigen::VectorXd tb(rows);
            for (Eigen::Index k = 0; k < rows; ++k) {
                xb.row(k) = x.row(order[begin + static_cast<std::size_t>(k)]);
                tb(k) = targets(order[begin + static_cast<std::size_t>(k)]);
            }
            // Data term of the rescaled objective: (1 / |batch|) sum (f - t) df.
            const NeuralGradient g = neural_loss_gradient(current, xb, tb, 0.0, 1.0);
            const double scale = cfg.learning_rate / static_cast<double>(rows);
            current.w1 -= scale * g.w1 + cfg.learning_rate * decay * current.w1;
            current.b1 -= scale * g.b1;
            current.w2 -= scale * g.w2 + cfg.learning_rate * decay * current.w2;
        }
        if (!current.finite()) {
            throw Error(ErrorKind::non_finite, "network parameters diverged; lower the learning rate");
        }
        const double score = holdout_smoothed_revenue(current, holdout_x, holdout, sigma);
        if (!std::isfinite(score)) {
            throw Error(ErrorKind::non_finite, "holdout objective is not finite");
        }
        if (score > best_score) {
            best_score = score;
            best = current;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    return best;
}

} // namespace ovem
