#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace recourse {

// Stable error codes. The textual names are part of the CLI contract and are
// printed as "error[E_...]: message".
enum class ErrorCode {
    invalid_argument,
    io,
    parse,
    schema,
    unknown_level,
    missing_value,
    empty_dataset,
    predictor,
    handshake,
    protocol_malformed,
    protocol_length,
    protocol_nonnumeric,
    process_exit,
    timeout,
    no_eligible_instance,
    degenerate_reward,
    empty_set,
    search_space,
};

constexpr std::string_view code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_argument: return "E_INVALID_ARGUMENT";
    case ErrorCode::io: return "E_IO";
    case ErrorCode::parse: return "E_PARSE";
    case ErrorCode::schema: return "E_SCHEMA";
    case ErrorCode::unknown_level: return "E_UNKNOWN_LEVEL";
    case ErrorCode::missing_value: return "E_MISSING_VALUE";
    case ErrorCode::empty_dataset: return "E_EMPTY_DATASET";
    case ErrorCode::predictor: return "E_PREDICTOR";
    case ErrorCode::handshake: return "E_HANDSHAKE";
    case ErrorCode::protocol_malformed: return "E_PROTOCOL_MALFORMED";
    case ErrorCode::protocol_length: return "E_PROTOCOL_LENGTH";
    case ErrorCode::protocol_nonnumeric: return "E_PROTOCOL_NONNUMERIC";
    case ErrorCode::process_exit: return "E_PROCESS_EXIT";
    case ErrorCode::timeout: return "E_TIMEOUT";
    case ErrorCode::no_eligible_instance: return "E_NO_ELIGIBLE_INSTANCE";
    case ErrorCode::degenerate_reward: return "E_DEGENERATE_REWARD";
    case ErrorCode::empty_set: return "E_EMPTY_SET";
    case ErrorCode::search_space: return "E_SEARCH_SPACE";
    }
    return "E_UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] std::string_view code_name() const noexcept { return recourse::code_name(code_); }

private:
    ErrorCode code_;
};

} // namespace recourse
