#pragma once

#include "mvis/ensemble.hpp"
#include "mvis/measures.hpp"
#include "mvis/models.hpp"

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

namespace mvis {

/// Damped Newton single shooting on the initial adjoint.
struct ShootingOptions {
    double tolerance = 1e-8;
    std::size_t max_iterations = 50;
    std::size_t max_halvings = 8;
    /// Relative finite-difference step for the shooting Jacobian.
    double fd_step = 1e-6;
};

/// Solution of a Pontryagin boundary-value problem on a grid.
///
/// The state is advanced by one classical RK4 step per cell with the control
/// and the frozen law held constant on the cell. The adjoint is the exact
/// discrete adjoint of that cell map, so `control` is a stationary point of
/// the rectangle-rule objective returned by the objective_* functions, not
/// just an O(dt) approximation of one.
struct BVPSolution {
    std::string kind;
    TimeGrid grid{1.0, 1};
    std::size_t n_particles = 0;   // complete problems only
    std::vector<double> state;     // X, or X^1
    std::vector<double> state_hat; // X-hat (complete problems)
    std::vector<double> adjoint;   // p, or p^1; one value per node
    std::vector<double> adjoint_hat;
    ControlPath control;           // hdot, ~ sigma p / 2
    std::vector<double> control_hat;
    double residual_norm = 0.0;
    std::size_t newton_iterations = 0;
    double objective_value = 0.0;
};

/// Decoupled problem: maximise 2 log G(X_T) - \int u'^2 with the law frozen
/// to `path`.
BVPSolution solve_bvp_decoupled(const ModelSpec& model, const MeasurePath& path, const Payoff& payoff,
                                const TimeGrid& grid, double x0, const ShootingOptions& options = {});

/// Complete problem on the two-atom law (1/N) delta_{X^1} + ((N-1)/N) delta_{X-hat}:
/// maximise 2 log G(X^1_T) - \int (u^1)'^2 - (N-1)/2 \int u-hat'^2.
BVPSolution solve_bvp_complete(const ModelSpec& model, const Payoff& payoff, std::size_t n_particles,
                               const TimeGrid& grid, double x0, const ShootingOptions& options = {});

/// X' = b(t, X, mu_t) + sigma u', RK4 per cell; returns the n_steps + 1 node values.
std::vector<double> controlled_trajectory(const ModelSpec& model, const MeasurePath& path, const ControlPath& u,
                                          const TimeGrid& grid, double x0);

struct PairTrajectory {
    std::vector<double> first;
    std::vector<double> hat;
};

PairTrajectory controlled_pair_trajectory(const ModelSpec& model, std::size_t n_particles, const ControlPath& u,
                                          const std::vector<double>& u_hat, const TimeGrid& grid, double x0);

/// 2 log G(X_T(u)) - sum_k u_k^2 dt; -infinity when G(X_T) == 0.
double objective_simplified(const ModelSpec& model, const MeasurePath& path, const Payoff& payoff,
                            const ControlPath& u, const TimeGrid& grid, double x0);

/// 2 log G(X^1_T) - sum (u^1_k)^2 dt - (N-1)/2 sum u-hat_k^2 dt; -infinity when G vanishes.
double objective_simplified_complete(const ModelSpec& model, std::size_t n_particles, const Payoff& payoff,
                                     const ControlPath& u, const std::vector<double>& u_hat,
                                     const TimeGrid& grid, double x0);

/// Result of comparing L(h) against the simplified objective at h.
struct GapReport {
    std::string scope;
    double l_value = 0.0;
    double simplified_value = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    double tolerance = 0.0;
    bool certified = false;
    BVPSolution inner;
};

/// L(h) = sup_u {2 log G(u) - \int h'u' + 1/2 \int h'^2 - 1/2 \int u'^2},
/// computed from the inner maximum principle (u' ~ sigma p - h').
GapReport optimality_check_decoupled(const ModelSpec& model, const MeasurePath& path, const Payoff& payoff,
                                     const ControlPath& h, const TimeGrid& grid, double x0,
                                     double tolerance = 1e-2, const ShootingOptions& options = {});

/// Same check for the complete algorithm, restricted to exchangeable inner
/// controls u^2 = ... = u^N. `u_hat` is the companion control of the
/// candidate (BVPSolution::control_hat).
GapReport optimality_check_complete(const ModelSpec& model, std::size_t n_particles, const Payoff& payoff,
                                    const ControlPath& h, const std::vector<double>& u_hat, const TimeGrid& grid,
                                    double x0, double tolerance = 1e-2, const ShootingOptions& options = {});

nlohmann::json to_json(const BVPSolution& solution);
nlohmann::json to_json(const GapReport& report);

}  // namespace mvis
