#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace newcast {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument violated a documented precondition.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A schedule put bits where the trace offers no capacity.
class InvalidScheduleError : public Error {
public:
    using Error::Error;
};

/// A plan stalls (or does not finish) where a stall-free session was required.
class InfeasiblePlanError : public Error {
public:
    using Error::Error;
};

/// Even the lowest quality level cannot be streamed without stalls.
class NoFeasibleSessionError : public Error {
public:
    using Error::Error;
};

/// One part of a partitioned (K-stall) session is infeasible.
class PartInfeasibleError : public NoFeasibleSessionError {
public:
    PartInfeasibleError(std::size_t part, const std::string &what)
        : NoFeasibleSessionError("part " + std::to_string(part) + ": " + what), part_(part) {}

    [[nodiscard]] std::size_t part() const noexcept { return part_; }

private:
    std::size_t part_;
};

/// The exhaustive search would exceed its node budget.
class BudgetExceededError : public Error {
public:
    using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed file content. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string &what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A declared column is absent from the header.
class MissingColumnError : public ParseError {
public:
    explicit MissingColumnError(const std::string &column)
        : ParseError(1, "missing column '" + column + "'") {}
};

/// Timestamps must be strictly increasing.
class NonMonotoneTimestampError : public ParseError {
public:
    using ParseError::ParseError;
};

} // namespace newcast
