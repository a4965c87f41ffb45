#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hqn {

// Base of every error raised by the library. The CLI maps these to exit
// code 1; argument validation failures surface as InvalidParameter and
// map to exit code 2 when raised during flag checking.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    explicit NotPositiveDefinite(std::size_t pivot)
        : Error("matrix is not positive definite (pivot " + std::to_string(pivot) + ")"),
          pivot_(pivot) {}

    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    // 1-based; 0 when the error is not tied to a line (e.g. "no rows").
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyCluster : public Error {
public:
    explicit EmptyCluster(std::size_t component)
        : Error("component " + std::to_string(component) + " has no effective points"),
          component_(component) {}

    std::size_t component() const noexcept { return component_; }

private:
    std::size_t component_;
};

class DegeneratePoint : public Error {
public:
    explicit DegeneratePoint(std::size_t row)
        : Error("every component density underflows at row " + std::to_string(row)),
          row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class NotEstimable : public Error {
public:
    using Error::Error;
};

class UnsupportedDimension : public Error {
public:
    using Error::Error;
};

class GridMismatch : public Error {
public:
    using Error::Error;
};

// Wraps an error raised inside the EM loop with the iteration it came from.
class FitError : public Error {
public:
    FitError(std::size_t iteration, const std::string& what)
        : Error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

} // namespace hqn
