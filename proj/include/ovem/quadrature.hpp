#pragma once

// Globally adaptive 10/21-point Gauss-Kronrod quadrature, and the
// posterior-moment oracle built on it. The oracle is a test arbiter for the
// closed-form E-step in posterior.hpp and shares no code path with it.

#include "ovem/auction.hpp"
#include "ovem/error.hpp"
#include "ovem/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

namespace ovem {

struct QuadResult {
    double value = 0.0;
    double abs_error = 0.0;
    long evaluations = 0;
};

struct QuadOptions {
    double rel_tol = 1e-13;
    double abs_tol = 0.0;
    long max_evaluations = 1'000'000;
};

namespace detail {

inline constexpr std::array<double, 11> kKronrodNodes = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.14887433898163121088482600112972,
    0.0};
inline constexpr std::array<double, 11> kKronrodWeights = {
    0.011694638867371874278064396062192, 0.03255816230796472747881897245939,
    0.05475589657435199603138130024458,  0.07503967481091995276704314091619,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};

struct Panel {
    double lo;
    double hi;
    double value;
    double abs_value;
    double error;

    bool operator<(const Panel& other) const { return error < other.error; }
};

template <class F>
Panel gauss_kronrod21(const F& f, double lo, double hi) {
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double fc = f(center);
    double kronrod = kKronrodWeights[10] * fc;
    double gauss = 0.0;
    double abs_sum = kKronrodWeights[10] * std::abs(fc);
    for (std::size_t k = 0; k < 10; ++k) {
        const double dx = half * kKronrodNodes[k];
        const double f1 = f(center - dx);
        const double f2 = f(center + dx);
        kronrod += kKronrodWeights[k] * (f1 + f2);
        abs_sum += kKronrodWeights[k] * (std::abs(f1) + std::abs(f2));
        if (k % 2 == 1) {
            gauss += kGaussWeights[k / 2] * (f1 + f2);
        }
    }
    const double value = kronrod * half;
    const double abs_value = abs_sum * std::abs(half);
    const double error = std::abs((kronrod - gauss) * half);
    return {lo, hi, value, abs_value, error};
}

} // namespace detail

/// Integrates f over [lo, hi], splitting first at every breakpoint inside the
/// interval, then bisecting the panel with the largest error estimate until
/// the total error is below rel_tol times the integral of |f|.
template <class F>
QuadResult integrate_adaptive(const F& f, double lo, double hi, std::vector<double> breakpoints = {},
                              const QuadOptions& options = {}) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw Error(ErrorKind::invalid_argument, "integration bounds must be finite with lo <= hi");
    }
    breakpoints.push_back(lo);
    breakpoints.push_back(hi);
    std::erase_if(breakpoints, [&](double x) { return !(x >= lo && x <= hi); });
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    constexpr long kEvalsPerPanel = 21;
    std::priority_queue<detail::Panel> panels;
    QuadResult result;
    double total = 0.0;
    double total_abs = 0.0;
    double total_error = 0.0;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        auto p = detail::gauss_kronrod21(f, breakpoints[i], breakpoints[i + 1]);
        result.evaluations += kEvalsPerPanel;
        total += p.value;
        total_abs += p.abs_value;
        total_error += p.error;
        panels.push(p);
    }

    while (!panels.empty() && total_error > std::max(options.abs_tol, options.rel_tol * total_abs)) {
        if (result.evaluations + 2 * kEvalsPerPanel > options.max_evaluations) {
            throw Error(ErrorKind::nonconvergence, "adaptive quadrature exceeded " +
                                                       std::to_string(options.max_evaluations) +
                                                       " evaluations, error estimate " +
                                                       std::to_string(total_error));
        }
        const detail::Panel worst = panels.top();
        panels.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi)) {
            // Panel cannot be split further in double precision; accept it.
            total_error -= worst.error;
            continue;
        }
        const auto left = detail::gauss_kronrod21(f, worst.lo, mid);
        const auto right = detail::gauss_kronrod21(f, mid, worst.hi);
        result.evaluations += 2 * kEvalsPerPanel;
        total += left.value + right.value - worst.value;
        total_abs += left.abs_value + right.abs_value - worst.abs_value;
        total_error += left.error + right.error - worst.error;
        panels.push(left);
        panels.push(right);
    }

    // Re-sum from the panels to shed the drift of the running updates.
    result.value = 0.0;
    result.abs_error = 0.0;
    while (!panels.empty()) {
        result.value += panels.top().value;
        result.abs_error += panels.top().error;
        panels.pop();
    }
    return result;
}

/// Integral over the real line of y^k * exp(-(B - revenue(y))) * phi((y - mu) / sigma),
/// for k in {0, 1}. Adaptive quadrature covers [min(b, mu - 12 sigma), max(B, mu + 12 sigma)];
/// the Gaussian tails beyond that window are added analytically.
inline double quad_posterior_moment(double mu, double sigma, double highest_bid, double second_bid, int k,
                                    const QuadOptions& options = {}) {
    check_bids(highest_bid, second_bid);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw Error(ErrorKind::invalid_sigma, "sigma must be positive and finite");
    }
    if (k != 0 && k != 1) {
        throw Error(ErrorKind::invalid_argument, "moment order must be 0 or 1");
    }
    const double big = highest_bid;
    const double small = second_bid;
    const auto integrand = [&](double y) {
        const double weight = std::exp(revenue(y, big, small) - big);
        const double t = (y - mu) / sigma;
        const double value = weight * std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
        return k == 0 ? value : y * value;
    };

    const double lo = std::min(small, mu - 12.0 * sigma);
    const double hi = std::max(big, mu + 12.0 * sigma);

    std::vector<double> breaks = {small, big, mu};
    const double tilted = mu + sigma * sigma;
    for (double step : {1.0, 2.0, 4.0, 8.0, 12.0}) {
        breaks.push_back(mu - step * sigma);
        breaks.push_back(mu + step * sigma);
        breaks.push_back(tilted - step * sigma);
        breaks.push_back(tilted + step * sigma);
    }
    breaks.push_back(tilted);

    const double body = integrate_adaptive(integrand, lo, hi, breaks, options).value;

    // Tails: below lo the weight is exp(b - B), above hi it is exp(-B).
    const double t_lo = (lo - mu) / sigma;
    const double t_hi = (hi - mu) / sigma;
    const double lower_mass = sigma * 0.5 * std::erfc(-t_lo / std::sqrt(2.0));
    const double upper_mass = sigma * 0.5 * std::erfc(t_hi / std::sqrt(2.0));
    const double pdf_lo = std::exp(-0.5 * t_lo * t_lo) / std::sqrt(2.0 * std::numbers::pi);
    const double pdf_hi = std::exp(-0.5 * t_hi * t_hi) / std::sqrt(2.0 * std::numbers::pi);
    double lower;
    double upper;
    if (k == 0) {
        lower = lower_mass;
        upper = upper_mass;
    } else {
        lower = mu * lower_mass - sigma * sigma * pdf_lo;
        upper = mu * upper_mass + sigma * sigma * pdf_hi;
    }
    return body + std::exp(small - big) * lower + std::exp(-big) * upper;
}

} // namespace ovem
