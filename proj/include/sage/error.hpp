#pragma once

#include <stdexcept>
#include <string>

namespace sage {

// Root of all errors thrown by the library. Defects found by the verifiers
// are ordinary return values, not exceptions; exceptions are reserved for
// malformed inputs, backend failures and broken run preconditions.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed structured-text document (bad JSON, bad predicate text, ...).
class SyntaxError : public Error {
public:
    SyntaxError(std::string msg, int line_) : Error(std::move(msg)), line(line_) {}
    int line = 0;  // 1-based; 0 when unknown
};

// Well-formed document violating a schema invariant.
class SchemaError : public Error {
public:
    SchemaError(std::string msg, std::string path_, int line_ = 0)
        : Error(std::move(msg)), path(std::move(path_)), line(line_) {}
    std::string path;  // offending location, e.g. "objects[1].states[0]"
    int line = 0;      // best effort; 0 when not derivable from the source
};

class ConfigError : public Error {
public:
    ConfigError(std::string msg, std::string key_) : Error(std::move(msg)), key(std::move(key_)) {}
    std::string key;
};

}  // namespace sage
