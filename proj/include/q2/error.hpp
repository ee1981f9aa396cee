#pragma once

#include <stdexcept>
#include <string>

namespace q2 {

// Base for every error the library raises. The message can be prefixed as the
// error travels outward (e.g. with the id of the example being scored).
class Error : public std::exception {
  public:
    explicit Error(std::string message) : message_(std::move(message)) {}

    const char *what() const noexcept override { return message_.c_str(); }

    void prepend(const std::string &context) { message_ = context + ": " + message_; }

  private:
    std::string message_;
};

// Malformed input text (bad JSON, bad CSV). Carries the 1-based line number.
class ParseError : public Error {
  public:
    ParseError(const std::string &message, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

// Well-formed record that is missing a required field or has the wrong type.
class SchemaError : public Error {
  public:
    using Error::Error;
};

// Record set violates a cross-record invariant (duplicate ids, bad label mix).
class ValidationError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

// Caller broke an operation's precondition.
class PreconditionError : public Error {
  public:
    using Error::Error;
};

// Backend could not be reached.
class TransportError : public Error {
  public:
    using Error::Error;
};

// Backend answered with something that does not follow the wire format.
class ProtocolError : public Error {
  public:
    using Error::Error;
};

// Replay-mode transcript has no entry for a request.
class CacheMissError : public Error {
  public:
    using Error::Error;
};

} // namespace q2
