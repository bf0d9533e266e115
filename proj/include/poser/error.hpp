#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace poser {

/// Base of every exception thrown by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric argument or shape outside its documented domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// No usable answer could be pulled out of a response ("no boxed answer",
/// "empty answer"). Callers treat this as an absent answer.
class ExtractionError : public Error {
public:
    using Error::Error;
};

/// Malformed input file, JSON line, or config value.
class ParseError : public Error {
public:
    using Error::Error;
};

/// File system failure or missing input.
class IoError : public Error {
public:
    using Error::Error;
};

/// Inference request failed after all retries.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int status, int attempts)
        : Error(what), status_(status), attempts_(attempts) {}

    /// HTTP status of the last attempt, or 0 when no response was received.
    int status() const noexcept { return status_; }
    int attempts() const noexcept { return attempts_; }

private:
    int status_;
    int attempts_;
};

/// Server answered, but the body does not follow the chat-completion schema.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Training produced non-finite parameters or gradients.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace poser
