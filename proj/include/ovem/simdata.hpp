#pragma once

// Simulated auction datasets and seeded train/validation/test splitting.

#include "ovem/auction.hpp"
#include "ovem/error.hpp"
#include "ovem/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

namespace ovem {

enum class SimVariant { linear, nonlinear };

struct SimConfig {
    std::size_t n_total = 2000;
    std::size_t dim = 5;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
    SimVariant variant = SimVariant::linear;
};

/// A generated dataset together with the ground truth that produced it.
struct SimulatedData {
    Dataset data;
    Eigen::VectorXd true_weights;
    double intercept = 0.0;
};

/// Features x ~ N(0, I), weights ~ N(0, I), intercept ~ N(0, 1), and highest
/// bid B ~ N(w.x + intercept, noise_std^2); second bid b = B / 2.
/// Linear: records with B < 0 are discarded and redrawn (features included).
/// Nonlinear: B is replaced by |B|, no rejection.
inline SimulatedData gen_simulated(const SimConfig& cfg) {
    if (cfg.n_total < 3 || cfg.dim == 0 || !(cfg.noise_std > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "simulation needs n_total >= 3, dim >= 1, noise_std > 0");
    }
    Rng rng(cfg.seed);
    SimulatedData out;
    out.true_weights.resize(static_cast<Eigen::Index>(cfg.dim));
    for (auto& w : out.true_weights) {
        w = rng.normal();
    }
    out.intercept = rng.normal();
    out.data = Dataset(cfg.dim);

    const std::size_t budget = 1000 * cfg.n_total;
    std::size_t draws = 0;
    std::vector<double> x(cfg.dim);
    while (out.data.size() < cfg.n_total) {
        if (++draws > budget) {
            throw Error(ErrorKind::rejection_budget_exceeded,
                        "positive highest bids too rare after " + std::to_string(budget) + " draws");
        }
        double mean = out.intercept;
        for (std::size_t j = 0; j < cfg.dim; ++j) {
            x[j] = rng.normal();
            mean += out.true_weights(static_cast<Eigen::Index>(j)) * x[j];
        }
        double highest = rng.normal(mean, cfg.noise_std);
        if (cfg.variant == SimVariant::linear) {
            if (highest < 0.0) {
                continue;
            }
        } else {
            highest = std::abs(highest);
        }
        out.data.push_back({x, highest, highest / 2.0});
    }
    return out;
}

struct Splits {
    Dataset train;
    Dataset valid;
    Dataset test;
};

/// Seeded uniform shuffle, then contiguous train/valid/test blocks.
inline Splits split(const Dataset& data, std::size_t n_train, std::size_t n_valid, std::size_t n_test,
                    std::uint64_t seed) {
    if (n_train + n_valid + n_test > data.size()) {
        throw Error(ErrorKind::insufficient_records, "requested " + std::to_string(n_train + n_valid + n_test) +
                                                         " records from " + std::to_string(data.size()));
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    Splits s{Dataset(data.dim()), Dataset(data.dim()), Dataset(data.dim())};
    std::size_t k = 0;
    for (; k < n_train; ++k) {
        s.train.push_back(data[order[k]]);
    }
    for (; k < n_train + n_valid; ++k) {
        s.valid.push_back(data[order[k]]);
    }
    for (; k < n_train + n_valid + n_test; ++k) {
        s.test.push_back(data[order[k]]);
    }
    return s;
}

} // namespace ovem
