#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvis {

/// Invalid mathematical input (empty cloud, vanishing payoff, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Inconsistent configuration: bad counts, mismatched grids, unknown keys.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by the particle simulators. `step()` is the Euler step at which the
/// failure was detected.
class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& what, std::size_t step)
        : std::runtime_error(what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Raised by the boundary-value solvers; carries the smallest residual seen.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double best_residual)
        : std::runtime_error(what), best_residual_(best_residual) {}

    double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

}  // namespace mvis
