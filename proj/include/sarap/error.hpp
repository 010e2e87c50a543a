#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sarap {

enum class ErrorCode {
    ParseError,
    NonManifold,
    InconsistentOrientation,
    DegenerateTriangle,
    InvalidParam,
    OutOfRange,
    NotPositiveDefinite,
    SingularSystem,
    DuplicateConstraint,
    NotConstrained,
    SingularConstraintBlock,
    NonFinite,
    NoMesh,
    IoError,
    BadRequest,
};

/// Stable name used in CLI diagnostics and session Error messages.
std::string_view to_string(ErrorCode code);

/// All library failures are reported through this type; `code()` is machine readable.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message)
        , m_code(code)
    {}

    ErrorCode code() const noexcept { return m_code; }

private:
    ErrorCode m_code;
};

} // namespace sarap
