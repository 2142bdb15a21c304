#pragma once

#include <stdexcept>
#include <string>

namespace unext {

// Configuration / shape / argument problems: caller passed something the
// contract forbids. CLI maps these to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / image / checkpoint I/O failures. CLI maps these to exit code 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation called in an invalid order (e.g. backward before forward) or a
// run aborted mid-flight (non-finite loss).
class StateError : public std::runtime_error {
public:
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Data fails a value-level precondition (e.g. non-binary ground truth).
class ValueError : public std::runtime_error {
public:
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace unext
