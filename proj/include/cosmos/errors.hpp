#pragma once

#include <stdexcept>
#include <string>

namespace cosmos {

/// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A domain record violates one of its declared invariants.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error("validation: " + field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Malformed input while parsing a file or wire payload.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0)
        : Error(line > 0 ? "parse error at line " + std::to_string(line) + ": " + what
                         : "parse error: " + what),
          line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Invalid or incomplete configuration (unknown kind, missing param, ...).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

/// A world model failed to produce a simulated observation.
class SimulationError : public Error {
public:
    explicit SimulationError(const std::string& what) : Error("simulation: " + what) {}
};

/// The schema-oracle world model was asked about a tool it does not know.
class UnknownToolError : public SimulationError {
public:
    UnknownToolError(const std::string& server, const std::string& tool)
        : SimulationError("unknown tool " + server + "/" + tool) {}
};

/// JSON-RPC framing or handshake violation on the wire client.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::string raw = {})
        : Error("protocol: " + what), raw_(std::move(raw)) {}

    /// Raw payload retained for diagnosis.
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

/// A metric is undefined for the given inputs (e.g. zero attempted calls).
class MetricError : public Error {
public:
    explicit MetricError(const std::string& what) : Error("metric: " + what) {}
};

} // namespace cosmos
