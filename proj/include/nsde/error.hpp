#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nsde {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation (log of a
// non-positive value, non-positive step size, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// A computation produced NaN or Inf. Never propagated silently.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

// Malformed input file. `line` is 1-based; 0 when not applicable.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Training loss became non-finite.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t iteration, const std::string& what)
        : Error("training diverged at iteration " + std::to_string(iteration) + ": " + what),
          iteration_(iteration) {}
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

}  // namespace nsde
