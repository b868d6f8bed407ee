#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace latomo {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition or input invariant was violated (bad dims, bad flags, wrong file type).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A file could not be parsed. Carries the byte offset where parsing failed.
class FormatError : public ValidationError {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : ValidationError(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// Failure during computation (divergence, non-finite iterate, I/O failure).
class RuntimeError : public Error {
public:
    using Error::Error;
};

/// Iterative solver residual kept growing.
class DivergenceError : public RuntimeError {
public:
    DivergenceError(const std::string& what, int iteration)
        : RuntimeError(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/// Violation of the external denoiser wire protocol.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at stream offset " + std::to_string(offset) + ")"), offset_(offset) {}
    explicit ProtocolError(const std::string& what) : Error(what), offset_(0) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace latomo
