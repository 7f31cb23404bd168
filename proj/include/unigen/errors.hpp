#pragma once

#include <stdexcept>
#include <string>

namespace unigen {

// Error taxonomy shared by the whole pipeline. Every stage throws one of
// these; the CLI maps them to exit codes and stderr messages.

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input that violates a documented invariant (bad soft label,
// inconsistent manifest, unknown eval label, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Syntactically broken file content. Carries the offending line when known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Prompt template missing a required slot or slot in an unusable position.
class TemplateError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Numerical breakdown inside an optimization loop (non-finite loss).
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace unigen
