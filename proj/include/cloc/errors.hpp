#pragma once

#include <stdexcept>
#include <string>

namespace cloc {

// Base of every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller supplied parameters that violate an operation's preconditions.
struct ParameterError : Error {
    using Error::Error;
};

// Numerical failure: singular evaluation, divergence, optimizer trouble.
struct NumericalError : Error {
    using Error::Error;
};

// Evaluation exactly on a pole, or a matrix that cannot be inverted.
struct SingularityError : NumericalError {
    using NumericalError::NumericalError;
};

// A describing-function kernel matrix (Lambda, Delta_rho, ...) is singular at omega.
struct KernelSingularityError : SingularityError {
    KernelSingularityError(std::string matrix_name, double omega_rad_s)
        : SingularityError("kernel matrix " + matrix_name + " is singular at omega = " +
                           std::to_string(omega_rad_s) + " rad/s"),
          matrix(std::move(matrix_name)),
          omega(omega_rad_s) {}

    std::string matrix;
    double omega;
};

// Simulated state exceeded the overflow guard.
struct DivergenceError : NumericalError {
    DivergenceError(double time_s, double magnitude)
        : NumericalError("simulation diverged at t = " + std::to_string(time_s) +
                         " s (|x| = " + std::to_string(magnitude) + ")"),
          time(time_s) {}

    double time;
};

// Derivative-free optimizer ran out of budget; carries the best point found.
struct OptimizerError : NumericalError {
    OptimizerError(const std::string& what, double best_zeta, double best_eta, double best_residual)
        : NumericalError(what), zeta(best_zeta), eta(best_eta), residual(best_residual) {}

    double zeta;
    double eta;
    double residual;
};

// Assembled design fails a hard requirement (e.g. unstable base linear system).
struct DesignInfeasible : Error {
    using Error::Error;
};

// Malformed or incomplete run configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace cloc
