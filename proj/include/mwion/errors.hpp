#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mwion {

// Physics / numerics failures (CLI exit code 1)
struct PhysicsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoRootError : PhysicsError {
    using PhysicsError::PhysicsError;
};

struct ResonanceError : PhysicsError {
    using PhysicsError::PhysicsError;
};

struct CutoffError : PhysicsError {
    using PhysicsError::PhysicsError;
};

struct InvariantViolationError : PhysicsError {
    using PhysicsError::PhysicsError;
};

// Fit did not converge; carries the last iterate so callers can inspect it.
struct FitError : PhysicsError {
    FitError(const std::string& msg, std::vector<double> last)
        : PhysicsError(msg), last_iterate(std::move(last)) {}
    std::vector<double> last_iterate;
};

struct RankDeficiencyError : PhysicsError {
    using PhysicsError::PhysicsError;
};

// Configuration / IO failures (CLI exit code 2)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : ConfigError {
    ParseError(const std::string& msg, int line) : ConfigError(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    int line_number;
};

} // namespace mwion
