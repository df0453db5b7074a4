#pragma once

#include <stdexcept>
#include <string>

namespace ferro {

/** @brief base of every error thrown by the library */
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidField : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct SolverConfigError : Error { using Error::Error; };
struct InvalidTestFunction : Error { using Error::Error; };
struct ConstraintViolation : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct WrongRegime : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

} // namespace ferro
