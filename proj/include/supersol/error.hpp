/**
 * @file error.hpp
 * @brief Error type shared by every supersol module.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace supersol {

enum class ErrorCode {
    BudgetExceeded,
    NonFiniteInput,
    BoundaryActive,
    GeneratorInfeasible,
    ContractionViolated,
    NoBracket,
    HypothesisViolated,
    NotSupermartingale,
    MeasureChangeInvalid,
    PreconditionUnmet,
    InvalidArgument,
    ConfigError,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::BudgetExceeded: return "BudgetExceeded";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::BoundaryActive: return "BoundaryActive";
        case ErrorCode::GeneratorInfeasible: return "GeneratorInfeasible";
        case ErrorCode::ContractionViolated: return "ContractionViolated";
        case ErrorCode::NoBracket: return "NoBracket";
        case ErrorCode::HypothesisViolated: return "HypothesisViolated";
        case ErrorCode::NotSupermartingale: return "NotSupermartingale";
        case ErrorCode::MeasureChangeInvalid: return "MeasureChangeInvalid";
        case ErrorCode::PreconditionUnmet: return "PreconditionUnmet";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/**
 * Exception carrying a machine-readable code, an optional node id
 * (solver errors are annotated with the node that failed) and an optional
 * numeric payload (e.g. the lower bound reported with BoundaryActive).
 */
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          std::optional<std::size_t> node = std::nullopt,
          std::optional<double> value = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), message_(message), node_(node), value_(value) {}

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> node() const noexcept { return node_; }
    std::optional<double> value() const noexcept { return value_; }

    const std::string& message() const noexcept { return message_; }

    Error with_node(std::size_t node) const {
        return Error(code_, message_ + " [node " + std::to_string(node) + "]", node, value_);
    }

private:
    ErrorCode code_;
    std::string message_;
    std::optional<std::size_t> node_;
    std::optional<double> value_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace supersol
