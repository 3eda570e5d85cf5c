#pragma once

#include <stdexcept>
#include <string>

namespace mfid {

/// Raised for malformed or inconsistent configuration (bad keys, invalid
/// step sizes, unknown catalog names, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised by the numerical kernels (no admissible cubic root, resolvent
/// failure, diverging iteration).
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Explicit time step violates the diffusion stability bound.
struct StepSizeError : SolverError {
  explicit StepSizeError(const std::string& msg) : SolverError(msg) {}
};

}  // namespace mfid
