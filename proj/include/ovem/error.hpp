#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ovem {

enum class ErrorKind {
    invalid_bids,
    invalid_sigma,
    invalid_argument,
    length_mismatch,
    dimension_mismatch,
    empty_dataset,
    zero_oracle_revenue,
    not_positive_definite,
    singular_system,
    nonconvergence,
    non_finite,
    rejection_budget_exceeded,
    insufficient_records,
    parse_error,
    io_error,
    malformed_file,
    kind_mismatch,
    all_points_failed,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_bids: return "invalid-bids";
    case ErrorKind::invalid_sigma: return "invalid-sigma";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::length_mismatch: return "length-mismatch";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::empty_dataset: return "empty-dataset";
    case ErrorKind::zero_oracle_revenue: return "zero-oracle-revenue";
    case ErrorKind::not_positive_definite: return "not-positive-definite";
    case ErrorKind::singular_system: return "singular-system";
    case ErrorKind::nonconvergence: return "nonconvergence";
    case ErrorKind::non_finite: return "non-finite";
    case ErrorKind::rejection_budget_exceeded: return "rejection-budget-exceeded";
    case ErrorKind::insufficient_records: return "insufficient-records";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::io_error: return "io-error";
    case ErrorKind::malformed_file: return "malformed-file";
    case ErrorKind::kind_mismatch: return "kind-mismatch";
    case ErrorKind::all_points_failed: return "all-points-failed";
    }
    return "unknown";
}

/// Library error. Every failure carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace ovem
