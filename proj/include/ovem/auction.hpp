#pragma once

// Auction records, the second-price-with-reserve revenue function, and
// revenue-based evaluation metrics.

#include "ovem/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ovem {

/// One historical auction: covariates plus the top two bids.
struct AuctionRecord {
    std::vector<double> features;
    double highest_bid = 0.0;
    double second_bid = 0.0;
};

inline void check_bids(double highest_bid, double second_bid) {
    if (!(second_bid >= 0.0) || !(second_bid <= highest_bid) || !std::isfinite(highest_bid)) {
        throw Error(ErrorKind::invalid_bids, "need 0 <= b <= B, got B=" + std::to_string(highest_bid) +
                                                 " b=" + std::to_string(second_bid));
    }
}

/// Ordered collection of auctions sharing one feature dimension.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::size_t dim) : dim_(dim) {}

    Dataset(std::size_t dim, std::vector<AuctionRecord> records) : dim_(dim) {
        records_.reserve(records.size());
        for (auto& r : records) {
            push_back(std::move(r));
        }
    }

    void push_back(AuctionRecord record) {
        if (record.features.size() != dim_) {
            throw Error(ErrorKind::dimension_mismatch,
                        "record has " + std::to_string(record.features.size()) + " features, dataset dim is " +
                            std::to_string(dim_));
        }
        check_bids(record.highest_bid, record.second_bid);
        records_.push_back(std::move(record));
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    const AuctionRecord& operator[](std::size_t i) const { return records_[i]; }
    const std::vector<AuctionRecord>& records() const noexcept { return records_; }

    auto begin() const noexcept { return records_.begin(); }
    auto end() const noexcept { return records_.end(); }

    /// N x d row-major copy of the features.
    Eigen::MatrixXd feature_matrix() const {
        Eigen::MatrixXd x(records_.size(), dim_);
        for (std::size_t i = 0; i < records_.size(); ++i) {
            for (std::size_t j = 0; j < dim_; ++j) {
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = records_[i].features[j];
            }
        }
        return x;
    }

    Eigen::VectorXd highest_bids() const {
        Eigen::VectorXd v(records_.size());
        for (std::size_t i = 0; i < records_.size(); ++i) {
            v(static_cast<Eigen::Index>(i)) = records_[i].highest_bid;
        }
        return v;
    }

    Eigen::VectorXd second_bids() const {
        Eigen::VectorXd v(records_.size());
        for (std::size_t i = 0; i < records_.size(); ++i) {
            v(static_cast<Eigen::Index>(i)) = records_[i].second_bid;
        }
        return v;
    }

private:
    std::size_t dim_ = 0;
    std::vector<AuctionRecord> records_;
};

/// Seller revenue for reserve `reserve` given highest bid B and second bid b.
/// Both boundaries y == b and y == B pay the reserve itself.
inline double revenue(double reserve, double highest_bid, double second_bid) {
    check_bids(highest_bid, second_bid);
    if (reserve < second_bid) {
        return second_bid;
    }
    if (reserve <= highest_bid) {
        return reserve;
    }
    return 0.0;
}

/// Likelihood that the host is satisfied with the outcome: exp(-(B - revenue)).
inline double satisfaction_prob(double reserve, double highest_bid, double second_bid) {
    return std::exp(-(highest_bid - revenue(reserve, highest_bid, second_bid)));
}

inline double total_revenue(std::span<const double> reserves, const Dataset& data) {
    if (reserves.size() != data.size()) {
        throw Error(ErrorKind::length_mismatch, std::to_string(reserves.size()) + " reserves for " +
                                                    std::to_string(data.size()) + " auctions");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < reserves.size(); ++i) {
        sum += revenue(reserves[i], data[i].highest_bid, data[i].second_bid);
    }
    return sum;
}

inline double total_revenue(const Eigen::VectorXd& reserves, const Dataset& data) {
    return total_revenue(std::span<const double>(reserves.data(), static_cast<std::size_t>(reserves.size())), data);
}

/// Revenue of a seller who knows every highest bid in advance.
inline double oracle_revenue(const Dataset& data) {
    if (data.empty()) {
        throw Error(ErrorKind::empty_dataset, "oracle revenue of an empty dataset");
    }
    double sum = 0.0;
    for (const auto& r : data) {
        sum += r.highest_bid;
    }
    return sum;
}

/// Percentage of the oracle revenue earned by `reserves`.
inline double pct_of_max(std::span<const double> reserves, const Dataset& data) {
    const double earned = total_revenue(reserves, data);
    const double best = oracle_revenue(data);
    if (!(best > 0.0)) {
        throw Error(ErrorKind::zero_oracle_revenue, "all highest bids are zero");
    }
    return 100.0 * earned / best;
}

inline double pct_of_max(const Eigen::VectorXd& reserves, const Dataset& data) {
    return pct_of_max(std::span<const double>(reserves.data(), static_cast<std::size_t>(reserves.size())), data);
}

} // namespace ovem
