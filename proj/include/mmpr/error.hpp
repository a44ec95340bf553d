#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmpr {

enum class ErrorKind {
    NotPSD,
    SingularMatrix,
    DegenerateBound,
    Unsupported,
    NonFinite,
    EmptyEnsemble,
    UnrepairableCovariance,
    InvalidArgument,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Numerical or contract failure raised by the library. The kind is the
/// machine-readable part; the message carries the context (indices, values).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace mmpr
