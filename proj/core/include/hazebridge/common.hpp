#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hazebridge {

#ifdef HAZEBRIDGE_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

// Error hierarchy. Everything user-facing derives from Error so callers can
// catch one type at the CLI boundary.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes (matmul mismatch, failed broadcast, ...).
struct ShapeError : Error {
    using Error::Error;
};

// Input outside the mathematical domain of an operation (log of a negative,
// time outside [0,1], ...).
struct DomainError : Error {
    using Error::Error;
};

// Caller violated an API contract (backward on a non-scalar, chain index
// past the schedule end, ...).
struct ContractError : Error {
    using Error::Error;
};

// Bad or inconsistent experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem / format problems; message carries the offending path.
struct IoError : Error {
    using Error::Error;
};

// Iterative solver ran out of iterations. Carries the final residual so the
// caller can decide whether "close enough" is acceptable.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& msg, double residual)
        : Error(msg), residual(residual) {}
    double residual;
};

// Checked mode turns on finite-value and domain validation inside tensor ops.
// Tests run with it on; training loops leave it off.
void set_checked_mode(bool on);
bool checked_mode();

struct CheckedModeGuard {
    explicit CheckedModeGuard(bool on) : prev_(checked_mode()) { set_checked_mode(on); }
    ~CheckedModeGuard() { set_checked_mode(prev_); }

private:
    bool prev_;
};

}  // namespace hazebridge
