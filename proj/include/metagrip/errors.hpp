#pragma once

#include <stdexcept>
#include <string>

namespace metagrip {

// Base class for everything a mechanism solver can throw. The CLI maps this
// family to exit code 3, configuration problems to exit code 2.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Jacobian condition estimate exceeded the singularity threshold. Usually a
// kinematic singularity or a guess on the wrong side of one.
struct SingularJacobian : SolverError {
    using SolverError::SolverError;
};

// Iteration budget or damping floor exhausted without meeting the residual
// tolerance. Usually an unreachable configuration.
struct NoConvergence : SolverError {
    using SolverError::SolverError;
};

// An input left the mathematical domain of a closed-form map (arccos/arcsin
// argument outside (-1, 1), zero contact distance, ...).
struct DomainError : SolverError {
    using SolverError::SolverError;
};

// A linkage loop has no real solution for the given lengths and pose.
struct AssemblyError : SolverError {
    using SolverError::SolverError;
};

// Requested end-effector target lies outside the vertical workspace.
struct OutOfReach : SolverError {
    using SolverError::SolverError;
};

// The pinned angles of the palm cross-section make the loop unsolvable.
struct OverconstrainedPin : SolverError {
    using SolverError::SolverError;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : ConfigError {
    using ConfigError::ConfigError;
};

struct ValidationError : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace metagrip
