#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mompc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// vehicle_model
class InfeasiblePower : public Error {
public:
    using Error::Error;
};

class HorizonNotReached : public Error {
public:
    using Error::Error;
};

// mocp_solver
class NoFeasibleControl : public Error {
public:
    using Error::Error;
};

class FrontExhausted : public Error {
public:
    using Error::Error;
};

// invariance_analyzer
class NotComparable : public Error {
public:
    using Error::Error;
};

// scenario_library
class EmptyGrid : public Error {
public:
    using Error::Error;
};

class NoFeasibleScenario : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line()` is 1-based; 0 means "not line specific".
class FormatError : public Error {
public:
    FormatError(std::size_t line, const std::string& what)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// mpc_controller
class EmptyFront : public Error {
public:
    using Error::Error;
};

class StallDetected : public Error {
public:
    using Error::Error;
};

// dp_baseline
class NoFeasiblePath : public Error {
public:
    using Error::Error;
};

class TrackMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace mompc
