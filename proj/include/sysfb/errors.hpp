#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sysfb {

/// Base of every error thrown by the toolkit. `kind()` is the stable name
/// used in structured CLI/API error payloads.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }
    const char* kind() const noexcept override { return "parse_error"; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation_error"; }
};

/// Precondition on an input value violated (empty inputs, k > n, ...).
class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain_error"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io_error"; }
};

class ConflictError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "conflict_error"; }
};

/// Network-level failure or 5xx; retryable.
class TransportError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "transport_error"; }
};

/// HTTP 4xx from a model endpoint; never retried.
class RequestError : public Error {
public:
    RequestError(const std::string& what, int status) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }
    const char* kind() const noexcept override { return "request_error"; }

private:
    int status_;
};

/// An endpoint answered, but with something that breaks its contract.
class ContractError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "contract_error"; }
};

class RenderError : public Error {
public:
    explicit RenderError(std::string placeholder)
        : Error("missing placeholder [[" + placeholder + "]]"), placeholder_(std::move(placeholder)) {}
    const std::string& placeholder() const noexcept { return placeholder_; }
    const char* kind() const noexcept override { return "render_error"; }

private:
    std::string placeholder_;
};

class VerdictParseError : public Error {
public:
    explicit VerdictParseError(std::string raw)
        : Error("no standalone Y/N verdict line in judge output"), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }
    const char* kind() const noexcept override { return "verdict_parse_error"; }

private:
    std::string raw_;
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config_error"; }
};

}  // namespace sysfb
