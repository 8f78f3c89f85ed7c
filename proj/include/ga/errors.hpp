#pragma once

#include <stdexcept>
#include <string>

namespace ga {

// Error codes surfaced by the CLI as module-qualified strings.
enum class ErrorCode {
    deflator_singular,
    maturity_out_of_range,
    non_positive_term_structure,
    transform_singular,
    numeraire_not_positive,
    exploded_path,
    grid_mismatch,
    dimension_mismatch,
    vanishing_volatility,
    no_convergence,
    sign_change,
    x_dependence,
    not_applicable,
    non_concave,
    config_invalid,
    io_error,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::deflator_singular: return "DeflatorSingular";
        case ErrorCode::maturity_out_of_range: return "MaturityOutOfRange";
        case ErrorCode::non_positive_term_structure: return "NonPositiveTermStructure";
        case ErrorCode::transform_singular: return "TransformSingular";
        case ErrorCode::numeraire_not_positive: return "NumeraireNotPositive";
        case ErrorCode::exploded_path: return "ExplodedPath";
        case ErrorCode::grid_mismatch: return "GridMismatch";
        case ErrorCode::dimension_mismatch: return "DimensionMismatch";
        case ErrorCode::vanishing_volatility: return "VanishingVolatility";
        case ErrorCode::no_convergence: return "NoConvergence";
        case ErrorCode::sign_change: return "SignChange";
        case ErrorCode::x_dependence: return "XDependence";
        case ErrorCode::not_applicable: return "NotApplicable";
        case ErrorCode::non_concave: return "NonConcaveDetected";
        case ErrorCode::config_invalid: return "ConfigInvalid";
        case ErrorCode::io_error: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace ga
