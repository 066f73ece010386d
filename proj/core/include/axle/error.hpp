#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace axle {

enum class ErrorKind {
    InvalidInput,
    InvalidPassage,
    InvalidLabels,
    OutOfRange,
    Config,
    WindowTooShort,
    ScaleTooLarge,
    DurationTooShort,
    TrainingDiverged,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the toolkit; `kind()` lets callers and tests
/// distinguish failure classes without a deep hierarchy.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace axle
