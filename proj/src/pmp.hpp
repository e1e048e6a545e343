#pragma once

// Single-shooting solver for deterministic control problems of the form
//
//   maximise  terminal(X_n) - sum_k dt * [ 1/2 c_k^T diag(alpha) c_k + beta_k^T c_k + offset_k ]
//   subject to X_{k+1} = RK4 cell map of X' = f(k, t, X) + sigma c_k.
//
// The unknown is the initial adjoint lambda_0. Given (X_k, lambda_k) each cell
// solves the discrete stationarity conditions
//
//   lambda_k = J_x^T lambda_{k+1},   J_c^T lambda_{k+1} = dt (alpha c_k + beta_k)
//
// for (c_k, lambda_{k+1}) by a fixed-point iteration; Newton then drives
// lambda_n - grad terminal(X_n) to zero.

#include "mvis/ensemble.hpp"
#include "mvis/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace mvis::detail {

template <std::size_t D>
using Vec = std::array<double, D>;
template <std::size_t D>
using Mat = std::array<std::array<double, D>, D>;

template <std::size_t D>
struct ControlProblem {
    TimeGrid grid{1.0, 1};
    Vec<D> x0{};
    double sigma = 1.0;
    /// Uncontrolled drift on cell k at time t and its Jacobian.
    std::function<Vec<D>(std::size_t, double, const Vec<D>&)> drift;
    std::function<Mat<D>(std::size_t, double, const Vec<D>&)> jacobian;
    Vec<D> alpha{};
    std::vector<Vec<D>> beta;     // empty: zero
    std::vector<double> offset;   // empty: zero
    std::function<double(const Vec<D>&)> terminal;
    /// Throws DomainError where the terminal gradient is undefined.
    std::function<Vec<D>(const Vec<D>&)> terminal_grad;

    Vec<D> beta_at(std::size_t k) const { return beta.empty() ? Vec<D>{} : beta[k]; }
    double offset_at(std::size_t k) const { return offset.empty() ? 0.0 : offset[k]; }
};

template <std::size_t D>
struct CellStep {
    Vec<D> next{};
    Mat<D> jx{};  // d next / d x
    Mat<D> jc{};  // d next / d c
};

template <std::size_t D>
Mat<D> identity() {
    Mat<D> m{};
    for (std::size_t i = 0; i < D; ++i) m[i][i] = 1.0;
    return m;
}

template <std::size_t D>
Mat<D> matmul(const Mat<D>& a, const Mat<D>& b) {
    Mat<D> c{};
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j)
            for (std::size_t l = 0; l < D; ++l) c[i][j] += a[i][l] * b[l][j];
    return c;
}

/// One classical RK4 step with control held at c, plus its exact tangents.
template <std::size_t D>
CellStep<D> rk4_cell(const ControlProblem<D>& p, std::size_t k, const Vec<D>& x, const Vec<D>& c) {
    const double h = p.grid.dt();
    const double t = p.grid.time(k);
    const double stage_t[4] = {t, t + 0.5 * h, t + 0.5 * h, t + h};
    const double stage_w[4] = {1.0, 2.0, 2.0, 1.0};
    const double stage_a[4] = {0.0, 0.5 * h, 0.5 * h, h};

    CellStep<D> out;
    out.next = x;
    out.jx = identity<D>();
    out.jc = Mat<D>{};
    Vec<D> slope{};
    Mat<D> slope_x{};
    Mat<D> slope_c{};
    for (int s = 0; s < 4; ++s) {
        Vec<D> xs = x;
        Mat<D> xs_x = identity<D>();
        Mat<D> xs_c{};
        if (s > 0) {
            for (std::size_t i = 0; i < D; ++i) {
                xs[i] += stage_a[s] * slope[i];
                for (std::size_t j = 0; j < D; ++j) {
                    xs_x[i][j] += stage_a[s] * slope_x[i][j];
                    xs_c[i][j] = stage_a[s] * slope_c[i][j];
                }
            }
        }
        const Vec<D> f = p.drift(k, stage_t[s], xs);
        const Mat<D> fx = p.jacobian(k, stage_t[s], xs);
        for (std::size_t i = 0; i < D; ++i) slope[i] = f[i] + p.sigma * c[i];
        slope_x = matmul<D>(fx, xs_x);
        slope_c = matmul<D>(fx, xs_c);
        for (std::size_t i = 0; i < D; ++i) slope_c[i][i] += p.sigma;
        const double w = h * stage_w[s] / 6.0;
        for (std::size_t i = 0; i < D; ++i) {
            out.next[i] += w * slope[i];
            for (std::size_t j = 0; j < D; ++j) {
                out.jx[i][j] += w * slope_x[i][j];
                out.jc[i][j] += w * slope_c[i][j];
            }
        }
    }
    return out;
}

/// Solves A^T y = b for D <= 2.
template <std::size_t D>
bool solve_transposed(const Mat<D>& a, const Vec<D>& b, Vec<D>& y) {
    static_assert(D == 1 || D == 2);
    if constexpr (D == 1) {
        if (a[0][0] == 0.0) return false;
        y[0] = b[0] / a[0][0];
    } else {
        // A^T = [[a00, a10], [a01, a11]]
        const double det = a[0][0] * a[1][1] - a[1][0] * a[0][1];
        if (det == 0.0 || !std::isfinite(det)) return false;
        y[0] = (a[1][1] * b[0] - a[1][0] * b[1]) / det;
        y[1] = (-a[0][1] * b[0] + a[0][0] * b[1]) / det;
    }
    return true;
}

template <std::size_t D>
Vec<D> transpose_apply(const Mat<D>& a, const Vec<D>& v) {
    Vec<D> out{};
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j) out[i] += a[j][i] * v[j];
    return out;
}

template <std::size_t D>
struct Sweep {
    std::vector<Vec<D>> states;
    std::vector<Vec<D>> adjoints;
    std::vector<Vec<D>> controls;
    Vec<D> residual{};
    bool ok = false;
};

template <std::size_t D>
double norm(const Vec<D>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

/// Forward sweep from an initial adjoint. `ok` is false when the trajectory
/// leaves the finite range or the terminal gradient is undefined.
template <std::size_t D>
Sweep<D> forward_sweep(const ControlProblem<D>& p, const Vec<D>& lambda0) {
    const std::size_t n = p.grid.n_steps();
    const double dt = p.grid.dt();
    Sweep<D> sw;
    sw.states.reserve(n + 1);
    sw.adjoints.reserve(n + 1);
    sw.controls.reserve(n);
    sw.states.push_back(p.x0);
    sw.adjoints.push_back(lambda0);

    auto finite = [](const Vec<D>& v) {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    };

    for (std::size_t k = 0; k < n; ++k) {
        const Vec<D>& x = sw.states.back();
        const Vec<D>& lambda = sw.adjoints.back();
        const Vec<D> beta = p.beta_at(k);
        Vec<D> c{};
        for (std::size_t d = 0; d < D; ++d) c[d] = (p.sigma * lambda[d] - beta[d]) / p.alpha[d];
        CellStep<D> step;
        Vec<D> lambda_next{};
        for (int iter = 0; iter < 100; ++iter) {
            step = rk4_cell<D>(p, k, x, c);
            if (!solve_transposed<D>(step.jx, lambda, lambda_next)) return sw;
            const Vec<D> g = transpose_apply<D>(step.jc, lambda_next);
            double change = 0.0;
            double scale = 1.0;
            Vec<D> c_new{};
            for (std::size_t d = 0; d < D; ++d) {
                c_new[d] = (g[d] / dt - beta[d]) / p.alpha[d];
                change = std::max(change, std::abs(c_new[d] - c[d]));
                scale = std::max(scale, std::abs(c_new[d]));
            }
            if (!finite(c_new)) return sw;
            c = c_new;
            if (change <= 4.0 * std::numeric_limits<double>::epsilon() * scale) break;
        }
        step = rk4_cell<D>(p, k, x, c);
        if (!solve_transposed<D>(step.jx, lambda, lambda_next)) return sw;
        if (!finite(step.next) || !finite(lambda_next)) return sw;
        sw.controls.push_back(c);
        sw.states.push_back(step.next);
        sw.adjoints.push_back(lambda_next);
    }
    Vec<D> target{};
    try {
        target = p.terminal_grad(sw.states.back());
    } catch (const DomainError&) {
        return sw;
    }
    for (std::size_t d = 0; d < D; ++d) sw.residual[d] = sw.adjoints.back()[d] - target[d];
    sw.ok = finite(sw.residual);
    return sw;
}

template <std::size_t D>
std::vector<Vec<D>> propagate(const ControlProblem<D>& p, const std::vector<Vec<D>>& controls) {
    std::vector<Vec<D>> states;
    states.reserve(controls.size() + 1);
    states.push_back(p.x0);
    for (std::size_t k = 0; k < controls.size(); ++k) states.push_back(rk4_cell<D>(p, k, states.back(), controls[k]).next);
    return states;
}

template <std::size_t D>
double objective(const ControlProblem<D>& p, const std::vector<Vec<D>>& controls) {
    const auto states = propagate<D>(p, controls);
    const double dt = p.grid.dt();
    double running = 0.0;
    for (std::size_t k = 0; k < controls.size(); ++k) {
        const Vec<D> beta = p.beta_at(k);
        double cell = p.offset_at(k);
        for (std::size_t d = 0; d < D; ++d)
            cell += 0.5 * p.alpha[d] * controls[k][d] * controls[k][d] + beta[d] * controls[k][d];
        running += cell * dt;
    }
    return p.terminal(states.back()) - running;
}

/// Canonical starting adjoint: terminal gradient along the zero-control
/// trajectory, pulled back through the discrete adjoint recursion.
template <std::size_t D>
Vec<D> initial_adjoint(const ControlProblem<D>& p) {
    const std::size_t n = p.grid.n_steps();
    const std::vector<Vec<D>> zero(n, Vec<D>{});
    const auto states = propagate<D>(p, zero);
    Vec<D> lambda = p.terminal_grad(states.back());
    for (std::size_t k = n; k-- > 0;) lambda = transpose_apply<D>(rk4_cell<D>(p, k, states[k], zero[k]).jx, lambda);
    return lambda;
}

struct ShootingSettings {
    double tolerance = 1e-8;
    std::size_t max_iterations = 50;
    std::size_t max_halvings = 8;
    double fd_step = 1e-6;
};

template <std::size_t D>
struct ShootingResult {
    Sweep<D> sweep;
    double residual_norm = 0.0;
    std::size_t iterations = 0;
};

template <std::size_t D>
ShootingResult<D> shoot(const ControlProblem<D>& p, const ShootingSettings& settings) {
    Vec<D> lambda0 = initial_adjoint<D>(p);
    Sweep<D> current = forward_sweep<D>(p, lambda0);
    if (!current.ok) {
        // Surface a vanishing payoff at the canonical start rather than a
        // generic convergence failure.
        if (current.states.size() == p.grid.n_steps() + 1) (void)p.terminal_grad(current.states.back());
        throw SolverError("shooting failed at the initial adjoint guess", std::numeric_limits<double>::infinity());
    }
    double best = norm<D>(current.residual);
    double best_seen = best;
    std::size_t iter = 0;
    while (best > settings.tolerance) {
        if (iter == settings.max_iterations)
            throw SolverError("shooting did not converge after " + std::to_string(iter) +
                                   " Newton iterations (best residual " + std::to_string(best_seen) + ")",
                              best_seen);
        ++iter;
        Mat<D> jac{};
        for (std::size_t j = 0; j < D; ++j) {
            Vec<D> probe = lambda0;
            const double h = settings.fd_step * std::max(1.0, std::abs(lambda0[j]));
            probe[j] += h;
            const Sweep<D> bumped = forward_sweep<D>(p, probe);
            if (!bumped.ok) throw SolverError("shooting Jacobian probe left the finite range", best_seen);
            for (std::size_t i = 0; i < D; ++i) jac[i][j] = (bumped.residual[i] - current.residual[i]) / h;
        }
        // Solve jac * delta = residual via the transposed solver on jac^T.
        Mat<D> jac_t{};
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t j = 0; j < D; ++j) jac_t[i][j] = jac[j][i];
        Vec<D> delta{};
        if (!solve_transposed<D>(jac_t, current.residual, delta))
            throw SolverError("singular shooting Jacobian", best_seen);

        double scale = 1.0;
        bool accepted = false;
        Vec<D> fallback_lambda{};
        Sweep<D> fallback;
        double fallback_norm = std::numeric_limits<double>::infinity();
        for (std::size_t halving = 0; halving <= settings.max_halvings; ++halving, scale *= 0.5) {
            Vec<D> trial = lambda0;
            for (std::size_t d = 0; d < D; ++d) trial[d] -= scale * delta[d];
            Sweep<D> sw = forward_sweep<D>(p, trial);
            if (!sw.ok) continue;
            const double r = norm<D>(sw.residual);
            if (r < best) {
                lambda0 = trial;
                current = std::move(sw);
                best = r;
                accepted = true;
                break;
            }
            if (r < fallback_norm) {
                fallback_norm = r;
                fallback_lambda = trial;
                fallback = std::move(sw);
            }
        }
        if (!accepted) {
            if (!std::isfinite(fallback_norm)) throw SolverError("damped Newton step left the finite range", best_seen);
            lambda0 = fallback_lambda;
            current = std::move(fallback);
            best = fallback_norm;
        }
        best_seen = std::min(best_seen, best);
    }
    return {std::move(current), best, iter};
}

}  // namespace mvis::detail
