#pragma once

#include <stdexcept>
#include <string>

namespace dr {

// Base for every error the engine raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (empty prompt, empty task, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Scenario file failed validation. Carries the file, field path, and the rule broken.
class ScenarioError : public Error {
public:
    ScenarioError(std::string file, std::string field, std::string rule)
        : Error(file + ": " + field + ": " + rule),
          file_(std::move(file)), field_(std::move(field)), rule_(std::move(rule)) {}

    const std::string& file() const { return file_; }
    const std::string& field() const { return field_; }
    const std::string& rule() const { return rule_; }

private:
    std::string file_;
    std::string field_;
    std::string rule_;
};

// A device refused an action ("app not installed", "no input target", ...).
class DeviceError : public Error {
public:
    using Error::Error;
};

// An LLM response could not be parsed into the expected grammar.
class ParseError : public Error {
public:
    ParseError(std::string grammar, std::string reason, std::string raw)
        : Error(grammar + " parse error: " + reason),
          grammar_(std::move(grammar)), reason_(std::move(reason)), raw_(std::move(raw)) {}

    const std::string& grammar() const { return grammar_; }
    const std::string& reason() const { return reason_; }
    const std::string& raw() const { return raw_; }

private:
    std::string grammar_;
    std::string reason_;
    std::string raw_;
};

// Transport-level failure talking to an LLM backend.
class GatewayError : public Error {
public:
    GatewayError(const std::string& what, int attempts, bool terminal)
        : Error(what), attempts_(attempts), terminal_(terminal) {}

    int attempts() const { return attempts_; }
    bool terminal() const { return terminal_; }

private:
    int attempts_;
    bool terminal_;
};

// An action could not be tied to an element on the current screen.
class GroundingError : public Error {
public:
    using Error::Error;
};

// Internal consistency violated; indicates a bug rather than bad input.
class InvariantError : public Error {
public:
    using Error::Error;
};

}  // namespace dr
