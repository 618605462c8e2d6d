#pragma once

// Closed-form E-step statistics for the reserve-price posterior
//
//   p(y | z = 1) ∝ exp(-(B - revenue(y, B, b))) * phi((y - mu) / sigma).
//
// The real line splits into y < b (weight e^{b-B}), b <= y <= B (weight
// e^{y-B}, a Gaussian tilted to mean mu + sigma^2) and y > B (weight e^{-B}).
// Each region contributes a log-mass and a truncated-normal mean; the
// posterior mean is the mass-weighted average of the three region means, so
// no large signed terms ever cancel. For the y > B region the first moment
// carries sigma^2 * phi((B - mu) / sigma).

#include "ovem/auction.hpp"
#include "ovem/error.hpp"
#include "ovem/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace ovem {

/// Per-auction E-step output.
struct PosteriorStats {
    /// ln(C e^B): the normalizer of the posterior scaled by e^B.
    double log_norm = 0.0;
    /// E[y | z = 1].
    double mean = 0.0;
};

namespace detail {

inline void check_posterior_args(double sigma, double highest_bid, double second_bid) {
    check_bids(highest_bid, second_bid);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorKind::invalid_sigma, "sigma must be positive and finite, got " + std::to_string(sigma));
    }
}

struct RegionMoments {
    std::array<double, 3> log_mass;
    std::array<double, 3> mean;
};

// E[t | lo < t < hi] for t ~ N(0, 1), given log(Phi(hi) - Phi(lo)).
inline double truncated_normal_mean(double lo, double hi, double log_mass) {
    const bool lo_nearer = std::abs(lo) <= std::abs(hi);
    const double near = lo_nearer ? lo : hi;
    const double far = lo_nearer ? hi : lo;
    // phi(far) - phi(near) = phi(near) * expm1((near - far)(near + far) / 2)
    const double rel = std::expm1(0.5 * (near - far) * (near + far));
    if (rel == 0.0) {
        return 0.0;
    }
    const double log_mag = log_std_normal_pdf(near) + std::log(std::abs(rel)) - log_mass;
    // numerator is phi(lo) - phi(hi)
    const double sign = lo_nearer ? -1.0 : 1.0;
    return sign * (rel < 0.0 ? -1.0 : 1.0) * std::exp(log_mag);
}

inline RegionMoments region_moments(double mu, double sigma, double highest_bid, double second_bid) {
    const double log_sigma = std::log(sigma);
    const double below = (second_bid - mu) / sigma;
    const double above = (highest_bid - mu) / sigma;
    const double tilted = mu + sigma * sigma;
    const double mid_lo = (second_bid - tilted) / sigma;
    const double mid_hi = (highest_bid - tilted) / sigma;

    RegionMoments m{};

    // y < b
    const double log_cdf_below = log_std_normal_cdf(below);
    m.log_mass[0] = log_sigma + second_bid + log_cdf_below;
    m.mean[0] = std::min(second_bid, mu - sigma * std::exp(log_std_normal_pdf(below) - log_cdf_below));

    // b <= y <= B
    if (highest_bid > second_bid) {
        const double log_delta = log_diff_std_normal_cdf(mid_hi, mid_lo);
        m.log_mass[1] = log_sigma + mu + 0.5 * sigma * sigma + log_delta;
        const double t_mean = truncated_normal_mean(mid_lo, mid_hi, log_delta);
        m.mean[1] = std::clamp(tilted + sigma * t_mean, second_bid, highest_bid);
    } else {
        m.log_mass[1] = kNegInf;
        m.mean[1] = second_bid;
    }

    // y > B
    const double log_sf_above = log_std_normal_cdf(-above);
    m.log_mass[2] = log_sigma + log_sf_above;
    m.mean[2] = std::max(highest_bid, mu + sigma * std::exp(log_std_normal_pdf(above) - log_sf_above));
    return m;
}

} // namespace detail

/// Both E-step statistics for one auction.
inline PosteriorStats posterior_stats(double mu, double sigma, double highest_bid, double second_bid) {
    detail::check_posterior_args(sigma, highest_bid, second_bid);
    if (!std::isfinite(mu)) {
        throw Error(ErrorKind::non_finite, "predicted mean is not finite");
    }
    const auto m = detail::region_moments(mu, sigma, highest_bid, second_bid);
    const SignedLog total = log_sum_exp({{1, m.log_mass[0]}, {1, m.log_mass[1]}, {1, m.log_mass[2]}});
    double mean = 0.0;
    for (std::size_t r = 0; r < 3; ++r) {
        if (m.log_mass[r] != kNegInf) {
            mean += std::exp(m.log_mass[r] - total.log_mag) * m.mean[r];
        }
    }
    return {total.log_mag, mean};
}

/// ln(C e^B) = ln[ sigma e^b Phi((b - mu)/sigma)
///               + sigma e^{mu + sigma^2/2} (Phi((B - mu - sigma^2)/sigma) - Phi((b - mu - sigma^2)/sigma))
///               + sigma (1 - Phi((B - mu)/sigma)) ]
inline double log_normalizer(double mu, double sigma, double highest_bid, double second_bid) {
    return posterior_stats(mu, sigma, highest_bid, second_bid).log_norm;
}

/// E[y | z = 1] under the smoothed posterior centred at mu.
inline double posterior_mean(double mu, double sigma, double highest_bid, double second_bid) {
    return posterior_stats(mu, sigma, highest_bid, second_bid).mean;
}

} // namespace ovem
