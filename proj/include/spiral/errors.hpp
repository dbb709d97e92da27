#pragma once

#include <stdexcept>
#include <string>

namespace spiral {

// Base for every typed error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Structured-output text did not match the expected grammar. Keeps the raw
// reply so callers can log what the model actually said.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::string raw)
        : Error(message), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

// Appending to a plan state that already ends in finish.
class AlreadyTerminal : public Error {
public:
    using Error::Error;
};

// Numeric or structural input outside the documented domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Invalid search/experiment configuration or mode combination.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Dataset file does not match the schema; carries the offending field path.
class SchemaError : public Error {
public:
    SchemaError(const std::string& message, std::string path)
        : Error(message + " (at " + path + ")"), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Transport-level failure from a live backend. Never thrown by the oracle.
class BackendError : public Error {
public:
    enum class Kind { Timeout, HttpStatus, Malformed };

    BackendError(Kind kind, const std::string& message, int status = 0)
        : Error(message), kind_(kind), status_(status) {}
    Kind kind() const noexcept { return kind_; }
    int status() const noexcept { return status_; }

private:
    Kind kind_;
    int status_;
};

class RejectFinish : public Error {
public:
    using Error::Error;
};

class EmptyTrajectory : public Error {
public:
    using Error::Error;
};

class SampleTooLarge : public Error {
public:
    using Error::Error;
};

class EmptyRecords : public Error {
public:
    using Error::Error;
};

} // namespace spiral
