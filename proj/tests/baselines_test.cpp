#include "oracles.hpp"

#include <gtest/gtest.h>

namespace {

TEST(Nof, ThreeAuctionExample) {
    const ovem::Dataset data(0, {{{}, 1.0, 0.5}, {{}, 2.0, 1.0}, {{}, 10.0, 5.0}});
    const auto fit = ovem::nof_fit_detailed(data);
    EXPECT_EQ(fit.policy.reserve, 10.0);
    EXPECT_EQ(fit.train_revenue, 10.0);
}

TEST(Nof, SingleAuction) {
    const ovem::Dataset data(0, {{{}, 3.25, 1.0}});
    EXPECT_EQ(ovem::nof_fit(data).reserve, 3.25);
}

TEST(Nof, EqualBidsPickSmallestCandidate) {
    const ovem::Dataset data(0, {{{}, 4.0, 4.0}, {{}, 2.0, 2.0}, {{}, 3.0, 3.0}});
    const auto fit = ovem::nof_fit_detailed(data);
    EXPECT_EQ(fit.policy.reserve, 2.0);
    EXPECT_EQ(fit.train_revenue, 9.0);
}

TEST(Nof, DuplicateHighestBids) {
    const ovem::Dataset data(0, {{{}, 2.0, 0.1}, {{}, 2.0, 0.2}, {{}, 2.0, 1.9}, {{}, 5.0, 0.0}});
    const auto fit = ovem::nof_fit_detailed(data);
    const auto brute = oracle::nof_brute_force(data);
    EXPECT_EQ(fit.policy.reserve, brute.reserve);
    EXPECT_EQ(fit.train_revenue, brute.revenue);
}

TEST(Nof, MatchesBruteForceOnRandomData) {
    ovem::Rng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        const auto n = 1 + static_cast<std::size_t>(rng.below(300));
        ovem::Dataset data(0);
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse grid so ties are common.
            const double high = 0.25 * static_cast<double>(1 + rng.below(20));
            const double second = 0.25 * static_cast<double>(rng.below(static_cast<std::uint64_t>(high * 4) + 1));
            data.push_back({{}, high, second});
        }
        const auto fit = ovem::nof_fit_detailed(data);
        const auto brute = oracle::nof_brute_force(data);
        EXPECT_EQ(fit.policy.reserve, brute.reserve);
        EXPECT_EQ(oracle::total_revenue(fit.policy.reserve, data), brute.revenue);
    }
}

TEST(Nof, EmptyTrainingSet) {
    try {
        ovem::nof_fit(ovem::Dataset(0));
        FAIL();
    } catch (const ovem::Error& e) {
        EXPECT_EQ(e.kind(), ovem::ErrorKind::empty_dataset);
    }
}

TEST(Zero, EarnsSecondBids) {
    const ovem::Dataset data(0, {{{}, 1.0, 0.5}, {{}, 2.0, 1.0}, {{}, 10.0, 5.0}});
    const auto zero = ovem::zero_policy();
    const Eigen::VectorXd r = zero.predict(data.feature_matrix());
    EXPECT_DOUBLE_EQ(ovem::total_revenue(r, data), 6.5);
    EXPECT_DOUBLE_EQ(ovem::pct_of_max(r, data), 100.0 * 6.5 / 13.0);
}

TEST(Zero, NeverBeatsNof) {
    ovem::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto data = oracle::random_dataset(rng, 50, 0);
        EXPECT_LE(oracle::total_revenue(0.0, data), ovem::nof_fit_detailed(data).train_revenue);
    }
}

} // namespace
