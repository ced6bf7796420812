#pragma once

#include <stdexcept>
#include <string>

namespace splitmesh {

// Shape/arity violations in tensor and layer arithmetic.
struct ShapeMismatch : std::runtime_error {
    explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

// BCE target outside {0,1}.
struct InvalidTarget : std::runtime_error {
    explicit InvalidTarget(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside the mathematical domain of a metric (e.g. log1p of x <= -1).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyModel : std::runtime_error {
    explicit EmptyModel(const std::string& what) : std::runtime_error(what) {}
};

// split requested on a model with a single hidden group.
struct TooShallow : std::runtime_error {
    explicit TooShallow(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownPreset : std::runtime_error {
    explicit UnknownPreset(const std::string& what) : std::runtime_error(what) {}
};

struct TooFewSamples : std::runtime_error {
    explicit TooFewSamples(const std::string& what) : std::runtime_error(what) {}
};

struct BatchTooSmall : std::runtime_error {
    explicit BatchTooSmall(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct NoUsableRows : std::runtime_error {
    explicit NoUsableRows(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownColumn : std::runtime_error {
    explicit UnknownColumn(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Node / session state machine errors.
struct NotConfigured : std::runtime_error {
    explicit NotConfigured(const std::string& what) : std::runtime_error(what) {}
};

struct MissingClient : std::runtime_error {
    explicit MissingClient(const std::string& what) : std::runtime_error(what) {}
};

struct RoundMismatch : std::runtime_error {
    explicit RoundMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct StaleRound : std::runtime_error {
    explicit StaleRound(const std::string& what) : std::runtime_error(what) {}
};

struct Timeout : std::runtime_error {
    explicit Timeout(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace splitmesh
