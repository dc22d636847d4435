#pragma once

#include <stdexcept>
#include <string>

namespace mwsim {

// Error taxonomy mirrors the CLI exit codes: 2 config, 3 solver, 4 data, 5 infeasible.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InfeasiblePolicy : std::runtime_error {
    explicit InfeasiblePolicy(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mwsim
