#ifndef LIFTFIT_ERROR_HPP
#define LIFTFIT_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace liftfit {

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported model text, or a model/parameter mismatch.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Syntax error with the byte offset into the model text.
class ParseError : public ModelError {
public:
    ParseError(std::size_t position, const std::string& message)
        : ModelError("parse error at position " + std::to_string(position) + ": " + message),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Evaluation outside a function's domain, or a non-finite model value.
class DomainError : public ModelError {
public:
    using ModelError::ModelError;
};

/// Problems with datasets: CSV format, variable mismatches, empty input.
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: non-finite systems, non-convergence, nothing to factor.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace liftfit

#endif // LIFTFIT_ERROR_HPP
