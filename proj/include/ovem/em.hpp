#pragma once

// Objective-variable EM. Each auction gets a latent reserve price
// y_i ~ N(f(x_i; w), sigma^2) and a hallucinated satisfaction observation
// z_i = 1 with likelihood exp(-(B_i - revenue(y_i))). The E-step replaces the
// latent prices by their posterior means; the M-step regresses the predictor
// onto those means. EM ascends the smoothed revenue
//
//   L(w) = sum_i [ln(C_i e^{B_i}) - B_i] - (lambda / 2) |w|^2.

#include "ovem/auction.hpp"
#include "ovem/error.hpp"
#include "ovem/posterior.hpp"
#include "ovem/predictors.hpp"
#include "ovem/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace ovem {

struct EmConfig {
    double sigma = 1.0;
    double lambda = 1e-2;
    double tol = 1e-5;
    std::size_t max_iters = 200;
    /// Worker threads for the E-step; 0 picks the hardware concurrency.
    std::size_t threads = 1;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw Error(ErrorKind::invalid_sigma, "EM sigma must be positive");
        }
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
            throw Error(ErrorKind::invalid_argument, "EM lambda must be non-negative");
        }
        if (!(tol > 0.0)) {
            throw Error(ErrorKind::invalid_argument, "EM tolerance must be positive");
        }
    }
};

struct EmTraceEntry {
    std::size_t iteration = 0;
    double smoothed_objective = 0.0;
    double valid_revenue = 0.0;
};

using EmTrace = std::vector<EmTraceEntry>;

/// Raised when the smoothed objective stops being finite; carries the trace so far.
class EmAborted : public Error {
public:
    EmAborted(const std::string& what, EmTrace trace)
        : Error(ErrorKind::non_finite, what), trace_(std::move(trace)) {}

    const EmTrace& trace() const noexcept { return trace_; }

private:
    EmTrace trace_;
};

/// sum_i [log_normalizer(mu_i) - B_i] - (lambda / 2) * reg_norm.
inline double smoothed_revenue(const Eigen::VectorXd& means, const Dataset& data, const EmConfig& config,
                               double reg_norm) {
    if (static_cast<std::size_t>(means.size()) != data.size()) {
        throw Error(ErrorKind::length_mismatch, std::to_string(means.size()) + " means for " +
                                                    std::to_string(data.size()) + " auctions");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data[i];
        total += log_normalizer(means(static_cast<Eigen::Index>(i)), config.sigma, r.highest_bid, r.second_bid) -
                 r.highest_bid;
    }
    return total - 0.5 * config.lambda * reg_norm;
}

/// Posterior means of the latent reserve prices, one per record, in order.
/// Records are split into contiguous blocks across `threads` workers; each
/// element is computed by the same arithmetic regardless of the split.
inline Eigen::VectorXd e_step(const Eigen::VectorXd& means, const Dataset& data, double sigma,
                              std::size_t threads = 1) {
    const auto n = data.size();
    if (static_cast<std::size_t>(means.size()) != n) {
        throw Error(ErrorKind::length_mismatch, std::to_string(means.size()) + " means for " +
                                                    std::to_string(n) + " auctions");
    }
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = std::min(threads, std::max<std::size_t>(1, n));

    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& r = data[i];
            try {
                out(static_cast<Eigen::Index>(i)) =
                    posterior_mean(means(static_cast<Eigen::Index>(i)), sigma, r.highest_bid, r.second_bid);
            } catch (const Error& e) {
                throw Error(e.kind(), "record " + std::to_string(i) + ": " + e.what());
            }
        }
    };

    if (threads == 1) {
        work(0, n);
        return out;
    }
    std::vector<std::exception_ptr> failures(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t begin = n * t / threads;
            const std::size_t end = n * (t + 1) / threads;
            pool.emplace_back([&, t, begin, end] {
                try {
                    work(begin, end);
                } catch (...) {
                    failures[t] = std::current_exception();
                }
            });
        }
    }
    for (const auto& f : failures) {
        if (f) {
            std::rethrow_exception(f);
        }
    }
    return out;
}

/// The per-predictor side of EM. A learner owns the training/validation data in
/// whatever precomputed form its M-step needs.
template <class L>
concept EmLearner = requires(L& learner, const L& cl, const Eigen::VectorXd& targets) {
    typename L::predictor_type;
    learner.mstep(targets);
    { cl.train_means() } -> std::convertible_to<Eigen::VectorXd>;
    { cl.valid_means() } -> std::convertible_to<Eigen::VectorXd>;
    { cl.penalty() } -> std::convertible_to<double>;
    { cl.predictor() } -> std::convertible_to<typename L::predictor_type>;
};

template <class P>
struct EmResult {
    P predictor;
    EmTrace trace;
    double best_valid_revenue = 0.0;
    std::size_t best_iteration = 0;
};

/// Runs EM from targets = highest bids. Iteration 0 is the initial M-step; each
/// later iteration is one E-step followed by one M-step. Stops when the change
/// in validation revenue is below tol * max(1, |validation revenue|) or after
/// max_iters iterations, and returns the snapshot with the best validation
/// revenue.
template <EmLearner L>
EmResult<typename L::predictor_type> em_fit(L& learner, const Dataset& train, const Dataset& valid,
                                            const EmConfig& config) {
    config.validate();
    if (train.empty() || valid.empty()) {
        throw Error(ErrorKind::empty_dataset, "EM needs non-empty training and validation sets");
    }
    if (train.dim() != valid.dim()) {
        throw Error(ErrorKind::dimension_mismatch, "training and validation dims differ");
    }

    EmResult<typename L::predictor_type> result;
    auto record = [&](std::size_t iteration) {
        const Eigen::VectorXd train_means = learner.train_means();
        const double objective = smoothed_revenue(train_means, train, config, learner.penalty());
        const double valid_rev = total_revenue(learner.valid_means(), valid);
        result.trace.push_back({iteration, objective, valid_rev});
        if (!std::isfinite(objective) || !std::isfinite(valid_rev)) {
            throw EmAborted("objective became non-finite at iteration " + std::to_string(iteration), result.trace);
        }
        if (iteration == 0 || valid_rev > result.best_valid_revenue) {
            result.best_valid_revenue = valid_rev;
            result.best_iteration = iteration;
            result.predictor = learner.predictor();
        }
        return valid_rev;
    };

    learner.mstep(train.highest_bids());
    double previous = record(0);
    for (std::size_t it = 1; it <= config.max_iters; ++it) {
        const Eigen::VectorXd targets = e_step(learner.train_means(), train, config.sigma, config.threads);
        learner.mstep(targets);
        const double current = record(it);
        if (std::abs(current - previous) < config.tol * std::max(1.0, std::abs(current))) {
            break;
        }
        previous = current;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Learners

class LinearLearner {
public:
    using predictor_type = LinearPredictor;

    LinearLearner(const Dataset& train, const Dataset& valid, double lambda, double sigma)
        : train_x_(train.feature_matrix()), valid_x_(valid.feature_matrix()), mstep_(train_x_, lambda, sigma) {}

    void mstep(const Eigen::VectorXd& targets) { current_ = mstep_(targets); }
    Eigen::VectorXd train_means() const { return current_.predict(train_x_); }
    Eigen::VectorXd valid_means() const { return current_.predict(valid_x_); }
    double penalty() const { return current_.penalty(); }
    const LinearPredictor& predictor() const { return current_; }

private:
    Eigen::MatrixXd train_x_;
    Eigen::MatrixXd valid_x_;
    LinearMStep mstep_;
    LinearPredictor current_;
};

class KernelLearner {
public:
    using predictor_type = KernelPredictor;

    KernelLearner(const Dataset& train, const Dataset& valid, int degree, double lambda, double sigma)
        : train_x_(train.feature_matrix()),
          gram_(kernel_gram(train_x_, train_x_, degree)),
          valid_gram_(kernel_gram(train_x_, valid.feature_matrix(), degree)),
          mstep_(gram_, lambda, sigma),
          degree_(degree) {}

    void mstep(const Eigen::VectorXd& targets) { alpha_ = mstep_(targets); }
    Eigen::VectorXd train_means() const { return gram_ * alpha_; }
    Eigen::VectorXd valid_means() const { return valid_gram_ * alpha_; }
    /// |w|^2 = alpha^T K alpha for w = sum_i alpha_i psi(x_i).
    double penalty() const { return alpha_.dot(gram_ * alpha_); }
    KernelPredictor predictor() const { return {alpha_, train_x_, degree_}; }

private:
    Eigen::MatrixXd train_x_;
    Eigen::MatrixXd gram_;
    Eigen::MatrixXd valid_gram_;
    KernelMStep mstep_;
    int degree_;
    Eigen::VectorXd alpha_;
};

/// Warm-started network learner: every M-step continues from the previous
/// parameters; the first one starts from init_neural(seed).
class NeuralLearner {
public:
    using predictor_type = NeuralPredictor;

    NeuralLearner(const Dataset& train, const Dataset& valid, std::size_t hidden_units, double lambda, double sigma,
                  const SgdConfig& sgd)
        : train_x_(train.feature_matrix()),
          valid_x_(valid.feature_matrix()),
          valid_(valid),
          lambda_(lambda),
          sigma_(sigma),
          sgd_(sgd),
          rng_(derive_seed(sgd.seed, 1)),
          current_(init_neural(train.dim(), hidden_units, derive_seed(sgd.seed, 0))) {}

    void mstep(const Eigen::VectorXd& targets) {
        current_ = neural_mstep(current_, train_x_, targets, lambda_, sigma_, sgd_, valid_, rng_);
    }
    Eigen::VectorXd train_means() const { return current_.predict(train_x_); }
    Eigen::VectorXd valid_means() const { return current_.predict(valid_x_); }
    double penalty() const { return current_.penalty(); }
    const NeuralPredictor& predictor() const { return current_; }

private:
    Eigen::MatrixXd train_x_;
    Eigen::MatrixXd valid_x_;
    const Dataset& valid_;
    double lambda_;
    double sigma_;
    SgdConfig sgd_;
    Rng rng_;
    NeuralPredictor current_;
};

} // namespace ovem
