#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fndt1 {

/// Failure classes; the CLI maps each class to a distinct exit code.
enum class ErrorClass {
    validation = 2,
    simulation = 3,
    fit_nonconvergence = 4,
    unreliable_result = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string msg)
        : std::runtime_error(std::move(msg)), cls_(cls) {}

    ErrorClass error_class() const noexcept { return cls_; }
    int exit_code() const noexcept { return static_cast<int>(cls_); }

private:
    ErrorClass cls_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::string msg)
        : Error(ErrorClass::validation, std::move(msg)) {}
};

class SimulationError : public Error {
public:
    explicit SimulationError(std::string msg)
        : Error(ErrorClass::simulation, std::move(msg)) {}
};

/// Thrown when the fitter runs out of iterations; carries the last iterate
/// so callers can inspect how far the descent got.
class FitNonConvergenceError : public Error {
public:
    FitNonConvergenceError(std::string msg, std::string diagnostics)
        : Error(ErrorClass::fit_nonconvergence, std::move(msg)),
          diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

class UnreliableResultError : public Error {
public:
    explicit UnreliableResultError(std::string msg)
        : Error(ErrorClass::unreliable_result, std::move(msg)) {}
};

} // namespace fndt1
