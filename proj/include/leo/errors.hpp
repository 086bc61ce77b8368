#pragma once

#include <stdexcept>
#include <string>

namespace leo {

// Invalid argument values or shape mismatches.
struct ParamError : std::runtime_error {
    explicit ParamError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / serialization failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values encountered mid-computation.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid run configuration (bad fields, incompatible checkpoints).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage was invoked before the stage it depends on.
struct DependencyError : std::runtime_error {
    explicit DependencyError(const std::string& stage)
        : std::runtime_error("missing dependency: " + stage), stage(stage) {}
    std::string stage;
};

}  // namespace leo
