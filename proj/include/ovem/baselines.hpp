#pragma once

// Feature-free reserve policies.

#include "ovem/auction.hpp"
#include "ovem/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace ovem {

/// One reserve price applied to every auction.
struct ScalarPolicy {
    double reserve = 0.0;

    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const { return Eigen::VectorXd::Constant(x.rows(), reserve); }
    double predict(std::span<const double>) const { return reserve; }
};

/// Revenue comparison used by every reserve sweep: a candidate must beat the
/// incumbent by more than 1e-12 relative to replace it, so near-ties keep the
/// smaller reserve.
inline bool clearly_better(double candidate, double incumbent) {
    return candidate > incumbent + 1e-12 * std::max(1.0, std::abs(incumbent));
}

struct NofFit {
    ScalarPolicy policy;
    double train_revenue = 0.0;
};

/// Best single reserve among the training highest bids, found with one sorted
/// sweep in O(N log N):
///   revenue(r) = sum_{b_i > r} b_i + r * #{i : b_i <= r <= B_i}.
/// A reserve of 0 (earning every second bid) is kept only if it is strictly better.
inline NofFit nof_fit_detailed(const Dataset& train) {
    if (train.empty()) {
        throw Error(ErrorKind::empty_dataset, "NoF needs training auctions");
    }
    const std::size_t n = train.size();
    std::vector<double> highs(n);
    std::vector<double> lows(n);
    for (std::size_t i = 0; i < n; ++i) {
        highs[i] = train[i].highest_bid;
        lows[i] = train[i].second_bid;
    }
    std::sort(highs.begin(), highs.end());
    std::sort(lows.begin(), lows.end());

    // suffix[k] = sum of lows[k..n)
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;) {
        suffix[k] = suffix[k + 1] + lows[k];
    }

    NofFit best;
    bool have_best = false;
    std::size_t low_count = 0; // #{b_i <= r}
    std::size_t high_below = 0; // #{B_i < r}
    for (std::size_t j = 0; j < n; ++j) {
        const double r = highs[j];
        if (j > 0 && r == highs[j - 1]) {
            continue;
        }
        while (low_count < n && lows[low_count] <= r) {
            ++low_count;
        }
        while (high_below < n && highs[high_below] < r) {
            ++high_below;
        }
        const double rev = suffix[low_count] + r * static_cast<double>(low_count - high_below);
        if (!have_best || clearly_better(rev, best.train_revenue)) {
            best = {{r}, rev};
            have_best = true;
        }
    }
    if (clearly_better(suffix[0], best.train_revenue)) {
        best = {{0.0}, suffix[0]};
    }
    return best;
}

inline ScalarPolicy nof_fit(const Dataset& train) { return nof_fit_detailed(train).policy; }

/// Reserve 0: every auction earns its second bid.
inline ScalarPolicy zero_policy() { return {0.0}; }

} // namespace ovem
