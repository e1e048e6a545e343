#include "mvis/control.hpp"

#include "mvis/errors.hpp"
#include "pmp.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace mvis {

namespace {

using detail::ControlProblem;
using detail::Mat;
using detail::Vec;

detail::ShootingSettings settings_from(const ShootingOptions& o) {
    return {o.tolerance, o.max_iterations, o.max_halvings, o.fd_step};
}

void check_grid(const MeasurePath& path, const TimeGrid& grid) {
    if (!(path.grid() == grid)) throw ConfigError("measure path grid does not match the control grid");
}

void check_control(const ControlPath& u, const TimeGrid& grid) {
    if (u.size() != grid.n_steps()) throw ConfigError("control length does not match the grid");
}

double twice_log(const Payoff& payoff, double x) {
    if (payoff.value(x) == 0.0) return -std::numeric_limits<double>::infinity();
    return 2.0 * payoff.log_value(x);
}

/// Dynamics X' = b(t, X, mu_k) + sigma c on cell k, law frozen at node k.
ControlProblem<1> decoupled_problem(const ModelSpec& model, const MeasurePath& path, const Payoff& payoff,
                                    const TimeGrid& grid, double x0) {
    validate(model);
    check_grid(path, grid);
    auto fields = std::make_shared<std::vector<MeanField>>();
    fields->reserve(grid.n_steps());
    for (std::size_t k = 0; k < grid.n_steps(); ++k) fields->emplace_back(model, grid.time(k), path.at_node(k));

    ControlProblem<1> p;
    p.grid = grid;
    p.x0 = {x0};
    p.sigma = model.sigma;
    p.drift = [fields](std::size_t k, double t, const Vec<1>& x) { return Vec<1>{(*fields)[k].drift(t, x[0])}; };
    p.jacobian = [fields](std::size_t k, double t, const Vec<1>& x) {
        return Mat<1>{{{(*fields)[k].drift_dx(t, x[0])}}};
    };
    p.alpha = {2.0};
    p.terminal = [payoff](const Vec<1>& x) { return twice_log(payoff, x[0]); };
    p.terminal_grad = [payoff](const Vec<1>& x) { return Vec<1>{payoff_terminal_adjoint(payoff, x[0])}; };
    return p;
}

/// Two-atom system (X^1, X-hat) under (1/N) delta_{X^1} + ((N-1)/N) delta_{X-hat}.
ControlProblem<2> complete_problem(const ModelSpec& model, const Payoff& payoff, std::size_t n_particles,
                                   const TimeGrid& grid, double x0) {
    validate(model);
    if (n_particles < 2) throw ConfigError("complete problem needs N >= 2");
    const double w1 = 1.0 / static_cast<double>(n_particles);
    const double w2 = 1.0 - w1;
    auto m = std::make_shared<ModelSpec>(model);

    ControlProblem<2> p;
    p.grid = grid;
    p.x0 = {x0, x0};
    p.sigma = model.sigma;
    p.drift = [m, w1, w2](std::size_t, double t, const Vec<2>& x) {
        const double a = x[0];
        const double b = x[1];
        return Vec<2>{m->beta(t, a) + w1 * m->kappa(t, a, a) + w2 * m->kappa(t, a, b),
                      m->beta(t, b) + w1 * m->kappa(t, b, a) + w2 * m->kappa(t, b, b)};
    };
    p.jacobian = [m, w1, w2](std::size_t, double t, const Vec<2>& x) {
        const double a = x[0];
        const double b = x[1];
        Mat<2> j{};
        j[0][0] = m->beta_dx(t, a) + w1 * (m->kappa_dx(t, a, a) + m->kappa_dy(t, a, a)) + w2 * m->kappa_dx(t, a, b);
        j[0][1] = w2 * m->kappa_dy(t, a, b);
        j[1][0] = w1 * m->kappa_dy(t, b, a);
        j[1][1] = m->beta_dx(t, b) + w1 * m->kappa_dx(t, b, a) + w2 * (m->kappa_dx(t, b, b) + m->kappa_dy(t, b, b));
        return j;
    };
    p.alpha = {2.0, static_cast<double>(n_particles - 1)};
    p.terminal = [payoff](const Vec<2>& x) { return twice_log(payoff, x[0]); };
    p.terminal_grad = [payoff](const Vec<2>& x) { return Vec<2>{payoff_terminal_adjoint(payoff, x[0]), 0.0}; };
    return p;
}

/// Objective part of the inner problem behind L(h):
///   1/2 u'^2 + h' u' - 1/2 h'^2   on the first control.
template <std::size_t D>
void make_inner(ControlProblem<D>& p, const ControlPath& h) {
    p.alpha[0] = 1.0;
    p.beta.assign(h.size(), Vec<D>{});
    p.offset.assign(h.size(), 0.0);
    for (std::size_t k = 0; k < h.size(); ++k) {
        p.beta[k][0] = h.hdot[k];
        p.offset[k] = -0.5 * h.hdot[k] * h.hdot[k];
    }
}

template <std::size_t D>
std::vector<Vec<D>> pack_controls(const ControlPath& u, const std::vector<double>* u_hat) {
    std::vector<Vec<D>> controls(u.size(), Vec<D>{});
    for (std::size_t k = 0; k < u.size(); ++k) {
        controls[k][0] = u.hdot[k];
        if constexpr (D == 2) controls[k][1] = (*u_hat)[k];
    }
    return controls;
}

template <std::size_t D>
BVPSolution unpack(const std::string& kind, const ControlProblem<D>& p, const detail::ShootingResult<D>& r) {
    BVPSolution s;
    s.kind = kind;
    s.grid = p.grid;
    const auto& sw = r.sweep;
    for (const auto& x : sw.states) {
        s.state.push_back(x[0]);
        if constexpr (D == 2) s.state_hat.push_back(x[1]);
    }
    for (const auto& l : sw.adjoints) {
        s.adjoint.push_back(l[0]);
        if constexpr (D == 2) s.adjoint_hat.push_back(l[1]);
    }
    for (const auto& c : sw.controls) {
        s.control.hdot.push_back(c[0]);
        if constexpr (D == 2) s.control_hat.push_back(c[1]);
    }
    s.residual_norm = r.residual_norm;
    s.newton_iterations = r.iterations;
    s.objective_value = detail::objective<D>(p, sw.controls);
    return s;
}

double relative(double gap, double reference) {
    const double scale = std::abs(reference);
    return scale > 0.0 ? gap / scale : std::abs(gap);
}

}  // namespace

BVPSolution solve_bvp_decoupled(const ModelSpec& model, const MeasurePath& path, const Payoff& payoff,
                                const TimeGrid& grid, double x0, const ShootingOptions& options) {
    const auto problem = decoupled_problem(model, path, payoff, grid, x0);
    const auto result = detail::shoot<1>(problem, settings_from(options));
    return unpack<1>("decoupled", problem, result);
}

BVPSolution solve_bvp_complete(const ModelSpec& model, const Payoff& payoff, std::size_t n_particles,
                               const TimeGrid& grid, double x0, const ShootingOptions& options) {
    const auto problem = complete_problem(model, payoff, n_particles, grid, x0);
    const auto result = detail::shoot<2>(problem, settings_from(options));
    auto solution = unpack<2>("complete", problem, result);
    solution.n_particles = n_particles;
    return solution;
}

std::vector<double> controlled_trajectory(const ModelSpec& model, const MeasurePath& path, const ControlPath& u,
                                          const TimeGrid& grid, double x0) {
    check_control(u, grid);
    const auto problem = decoupled_problem(model, path, constant_payoff(1.0), grid, x0);
    const auto states = detail::propagate<1>(problem, pack_controls<1>(u, nullptr));
    std::vector<double> out;
    out.reserve(states.size());
    for (const auto& x : states) out.push_back(x[0]);
    return out;
}

PairTrajectory controlled_pair_trajectory(const ModelSpec& model, std::size_t n_particles, const ControlPath& u,
                                          const std::vector<double>& u_hat, const TimeGrid& grid, double x0) {
    check_control(u, grid);
    if (u_hat.size() != grid.n_steps()) throw ConfigError("companion control length does not match the grid");
    const auto problem = complete_problem(model, constant_payoff(1.0), n_particles, grid, x0);
    const auto states = detail::propagate<2>(problem, pack_controls<2>(u, &u_hat));
    PairTrajectory out;
    for (const auto& x : states) {
        out.first.push_back(x[0]);
        out.hat.push_back(x[1]);
    }
    return out;
}

double objective_simplified(const ModelSpec& model, const MeasurePath& path, const Payoff& payoff,
                            const ControlPath& u, const TimeGrid& grid, double x0) {
    check_control(u, grid);
    const auto problem = decoupled_problem(model, path, payoff, grid, x0);
    const double value = detail::objective<1>(problem, pack_controls<1>(u, nullptr));
    return std::isnan(value) ? -std::numeric_limits<double>::infinity() : value;
}

double objective_simplified_complete(const ModelSpec& model, std::size_t n_particles, const Payoff& payoff,
                                     const ControlPath& u, const std::vector<double>& u_hat,
                                     const TimeGrid& grid, double x0) {
    check_control(u, grid);
    if (u_hat.size() != grid.n_steps()) throw ConfigError("companion control length does not match the grid");
    const auto problem = complete_problem(model, payoff, n_particles, grid, x0);
    const double value = detail::objective<2>(problem, pack_controls<2>(u, &u_hat));
    return std::isnan(value) ? -std::numeric_limits<double>::infinity() : value;
}

GapReport optimality_check_decoupled(const ModelSpec& model, const MeasurePath& path, const Payoff& payoff,
                                     const ControlPath& h, const TimeGrid& grid, double x0, double tolerance,
                                     const ShootingOptions& options) {
    check_control(h, grid);
    if (!h.all_finite()) throw ConfigError("control contains non-finite entries");
    auto inner = decoupled_problem(model, path, payoff, grid, x0);
    make_inner(inner, h);
    const auto result = detail::shoot<1>(inner, settings_from(options));

    GapReport report;
    report.scope = "decoupled";
    report.inner = unpack<1>("decoupled-inner", inner, result);
    report.l_value = report.inner.objective_value;
    report.simplified_value = objective_simplified(model, path, payoff, h, grid, x0);
    report.gap = report.l_value - report.simplified_value;
    report.relative_gap = relative(report.gap, report.l_value);
    report.tolerance = tolerance;
    report.certified = report.relative_gap <= tolerance;
    return report;
}

GapReport optimality_check_complete(const ModelSpec& model, std::size_t n_particles, const Payoff& payoff,
                                    const ControlPath& h, const std::vector<double>& u_hat, const TimeGrid& grid,
                                    double x0, double tolerance, const ShootingOptions& options) {
    check_control(h, grid);
    if (!h.all_finite()) throw ConfigError("control contains non-finite entries");
    auto inner = complete_problem(model, payoff, n_particles, grid, x0);
    make_inner(inner, h);
    const auto result = detail::shoot<2>(inner, settings_from(options));

    GapReport report;
    report.scope = "complete, exchangeable restriction u^2 = ... = u^N";
    report.inner = unpack<2>("complete-inner", inner, result);
    report.inner.n_particles = n_particles;
    report.l_value = report.inner.objective_value;
    report.simplified_value = objective_simplified_complete(model, n_particles, payoff, h, u_hat, grid, x0);
    report.gap = report.l_value - report.simplified_value;
    report.relative_gap = relative(report.gap, report.l_value);
    report.tolerance = tolerance;
    report.certified = report.relative_gap <= tolerance;
    return report;
}

nlohmann::json to_json(const BVPSolution& s) {
    nlohmann::json j;
    j["kind"] = s.kind;
    j["T"] = s.grid.horizon();
    j["n_steps"] = s.grid.n_steps();
    std::vector<double> time;
    for (std::size_t k = 0; k <= s.grid.n_steps(); ++k) time.push_back(s.grid.time(k));
    j["time"] = time;
    j["state"] = s.state;
    j["adjoint"] = s.adjoint;
    j["control"] = s.control.hdot;
    if (!s.state_hat.empty()) {
        j["n_particles"] = s.n_particles;
        j["state_hat"] = s.state_hat;
        j["adjoint_hat"] = s.adjoint_hat;
        j["control_hat"] = s.control_hat;
    }
    j["residual_norm"] = s.residual_norm;
    j["newton_iterations"] = s.newton_iterations;
    j["objective_value"] = s.objective_value;
    return j;
}

nlohmann::json to_json(const GapReport& r) {
    return {{"scope", r.scope},
            {"L_value", r.l_value},
            {"simplified_value", r.simplified_value},
            {"gap", r.gap},
            {"relative_gap", r.relative_gap},
            {"tolerance", r.tolerance},
            {"certified", r.certified},
            {"inner_residual_norm", r.inner.residual_norm},
            {"inner_newton_iterations", r.inner.newton_iterations},
            {"inner", to_json(r.inner)}};
}

}  // namespace mvis
