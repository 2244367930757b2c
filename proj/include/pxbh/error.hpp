#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pxbh {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A Gid that the registry cannot resolve.
class ResolutionError : public Error {
public:
    using Error::Error;
};

/// Second write to a future.
class SingleAssignmentError : public Error {
public:
    using Error::Error;
};

/// Raised by quiesce when the queues drained but continuations still wait on unset futures.
class DeadlockError : public Error {
public:
    DeadlockError(const std::string& context, std::vector<std::uint64_t> unsatisfied);

    const std::vector<std::uint64_t>& unsatisfied() const noexcept { return unsatisfied_; }

private:
    std::vector<std::uint64_t> unsatisfied_;
};

class DuplicatePositionError : public Error {
public:
    DuplicatePositionError(std::vector<std::size_t> indices);

    const std::vector<std::size_t>& indices() const noexcept { return indices_; }

private:
    std::vector<std::size_t> indices_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NumericalBlowupError : public Error {
public:
    NumericalBlowupError(std::uint64_t iteration, const std::string& what);

    std::uint64_t iteration() const noexcept { return iteration_; }

private:
    std::uint64_t iteration_;
};

}  // namespace pxbh
