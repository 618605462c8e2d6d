#pragma once

// Standard-normal special functions with log-domain variants, signed
// log-sum-exp, and a Cholesky-backed SPD solver.

#include "ovem/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>

namespace ovem {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562; // 0.5 * ln(2 pi)
inline constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;

inline double std_normal_pdf(double t) {
    return std::exp(-0.5 * t * t - kLogSqrt2Pi);
}

inline double log_std_normal_pdf(double t) {
    return -0.5 * t * t - kLogSqrt2Pi;
}

inline double std_normal_cdf(double t) {
    return 0.5 * std::erfc(-t * kInvSqrt2);
}

namespace detail {

// Mills ratio (1 - Phi(x)) / phi(x) for x >= 10 by backward evaluation of
// the continued fraction 1/(x + 1/(x + 2/(x + 3/(x + ...)))).
inline double mills_ratio_upper(double x) {
    double r = x;
    for (int k = 80; k >= 1; --k) {
        r = x + k / r;
    }
    return 1.0 / r;
}

// ln(1 - e^x) for x <= 0.
inline double log1mexp(double x) {
    if (x >= 0.0) {
        return kNegInf;
    }
    return x > -std::numbers::ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

// 10-point Gauss-Legendre nodes/weights (positive half).
inline constexpr std::array<double, 5> kGaussNodes = {
    0.973906528517171720077964012084452, 0.865063366688984510732096688423493,
    0.679409568299024406234327365114874, 0.433395394129247190799265943165784,
    0.14887433898163121088482600112972};
inline constexpr std::array<double, 5> kGaussWeights = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

} // namespace detail

/// ln Phi(t), finite for every finite t.
inline double log_std_normal_cdf(double t) {
    if (t > 5.0) {
        return std::log1p(-0.5 * std::erfc(t * kInvSqrt2));
    }
    if (t >= -10.0) {
        return std::log(0.5 * std::erfc(-t * kInvSqrt2));
    }
    const double x = -t;
    return log_std_normal_pdf(x) + std::log(detail::mills_ratio_upper(x));
}

/// ln(Phi(hi) - Phi(lo)) for lo <= hi; -inf when lo == hi.
inline double log_diff_std_normal_cdf(double hi, double lo) {
    if (!(hi >= lo)) {
        throw Error(ErrorKind::invalid_argument, "log_diff_std_normal_cdf needs hi >= lo");
    }
    if (hi == lo) {
        return kNegInf;
    }
    const double width = hi - lo;
    const double nearest = (lo <= 0.0 && hi >= 0.0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
    if (width * std::max(1.0, nearest) <= 1.0) {
        // Narrow panel: integrate phi directly so the difference never cancels.
        const double center = 0.5 * (hi + lo);
        const double half = 0.5 * width;
        const double shift = 0.5 * nearest * nearest;
        double sum = 0.0;
        for (std::size_t k = 0; k < detail::kGaussNodes.size(); ++k) {
            const double a = center + half * detail::kGaussNodes[k];
            const double b = center - half * detail::kGaussNodes[k];
            sum += detail::kGaussWeights[k] * (std::exp(shift - 0.5 * a * a) + std::exp(shift - 0.5 * b * b));
        }
        return std::log(half) + std::log(sum) - shift - kLogSqrt2Pi;
    }
    if (lo >= 0.0) {
        const double log_upper_lo = log_std_normal_cdf(-lo);
        const double log_upper_hi = log_std_normal_cdf(-hi);
        return log_upper_lo + detail::log1mexp(log_upper_hi - log_upper_lo);
    }
    const double log_hi = log_std_normal_cdf(hi);
    const double log_lo = log_std_normal_cdf(lo);
    return log_hi + detail::log1mexp(log_lo - log_hi);
}

/// A real number stored as sign and natural-log magnitude.
struct SignedLog {
    int sign = 1;
    double log_mag = kNegInf;

    double value() const { return sign * std::exp(log_mag); }
};

/// Signed sum in the log domain. Exact cancellation yields log_mag = -inf.
inline SignedLog log_sum_exp(std::span<const SignedLog> terms) {
    if (terms.empty()) {
        throw Error(ErrorKind::invalid_argument, "log_sum_exp of an empty list");
    }
    double peak = kNegInf;
    for (const auto& t : terms) {
        if (std::isnan(t.log_mag)) {
            throw Error(ErrorKind::non_finite, "log_sum_exp term is nan");
        }
        peak = std::max(peak, t.log_mag);
    }
    if (peak == kNegInf) {
        return {1, kNegInf};
    }
    if (!std::isfinite(peak)) {
        throw Error(ErrorKind::non_finite, "log_sum_exp term is +inf");
    }
    double pos = 0.0;
    double neg = 0.0;
    for (const auto& t : terms) {
        const double scaled = std::exp(t.log_mag - peak);
        (t.sign >= 0 ? pos : neg) += scaled;
    }
    const double diff = pos - neg;
    if (diff == 0.0) {
        return {1, kNegInf};
    }
    return {diff > 0.0 ? 1 : -1, peak + std::log(std::abs(diff))};
}

inline SignedLog log_sum_exp(std::initializer_list<SignedLog> terms) {
    return log_sum_exp(std::span<const SignedLog>(terms.begin(), terms.size()));
}

/// Cholesky factor of a symmetric positive-definite matrix.
class SpdFactor {
public:
    explicit SpdFactor(const Eigen::MatrixXd& a) {
        if (a.rows() != a.cols()) {
            throw Error(ErrorKind::dimension_mismatch, "SPD matrix must be square");
        }
        const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
        if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw Error(ErrorKind::invalid_argument, "matrix is not symmetric");
        }
        llt_.compute(a);
        if (llt_.info() != Eigen::Success || !llt_.matrixLLT().diagonal().allFinite() ||
            (llt_.matrixLLT().diagonal().array() <= 0.0).any()) {
            throw Error(ErrorKind::not_positive_definite,
                        "Cholesky factorization failed for " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " matrix");
        }
    }

    Eigen::Index size() const { return llt_.rows(); }

    template <class Rhs>
    auto solve(const Eigen::MatrixBase<Rhs>& rhs) const {
        if (rhs.rows() != llt_.rows()) {
            throw Error(ErrorKind::dimension_mismatch, "right-hand side has wrong row count");
        }
        using Result = Eigen::Matrix<double, Eigen::Dynamic, Rhs::ColsAtCompileTime>;
        return Result(llt_.solve(rhs));
    }

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

template <class Rhs>
auto solve_spd(const Eigen::MatrixXd& a, const Eigen::MatrixBase<Rhs>& rhs) {
    return SpdFactor(a).solve(rhs);
}

} // namespace ovem
