#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace impact {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (t outside [0,T], rho <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Input data cannot support the requested estimate (too few events, rank deficiency, separation).
class DataError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw DomainError(message);
    }
}

} // namespace detail

} // namespace impact
