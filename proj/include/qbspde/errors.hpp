#pragma once

#include <stdexcept>
#include <string>

namespace qbspde {

/// Bad argument values (dimension mismatch, out-of-range parameters).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A structural assumption failed at a concrete point (e.g. non-symmetric
/// diffusion matrix); the message names the offending sample.
struct StructuralError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input left the mathematical domain of a map (e.g. log of a non-positive
/// value); the message names the node.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Value would overflow double range.
struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fixed-point iteration did not converge; carries the last residual.
struct ConvergenceError : std::runtime_error {
    double last_residual;
    ConvergenceError(const std::string& msg, double residual)
        : std::runtime_error(msg), last_residual(residual) {}
};

/// NaN/Inf appeared during a time march; the message names the time level.
struct BlowupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Problem size exceeds what the method is meant for.
struct ScaleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Regression matrix numerically singular.
struct RankError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parameter search exhausted without certificate; carries the best value seen.
struct SearchFailure : std::runtime_error {
    double best_margin;
    SearchFailure(const std::string& msg, double best)
        : std::runtime_error(msg), best_margin(best) {}
};

/// File I/O failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace qbspde
