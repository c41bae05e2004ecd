#pragma once

#include <stdexcept>
#include <string>

namespace iled {

// Error taxonomy mirrors the CLI exit-code contract:
//   ConfigError -> 2, SimulationError -> 3, TrainingError -> 4, DataError -> 5.
// Everything else (including ShapeError) is a programming/usage error and maps
// to the generic failure code.

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

class SimulationError : public Error {
public:
    explicit SimulationError(const std::string& what) : Error(what) {}
};

class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& what) : Error(what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what) {}
};

}  // namespace iled
