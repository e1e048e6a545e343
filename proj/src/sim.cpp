#include "mvis/sim.hpp"

#include "mvis/errors.hpp"
#include "mvis/format.hpp"
#include "mvis/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

namespace mvis {

namespace {

constexpr std::size_t kNoFailure = std::numeric_limits<std::size_t>::max();

[[noreturn]] void throw_explosion(std::size_t step) {
    throw SimulationError("explosion at step " + std::to_string(step), step);
}

std::vector<double> node_states(const ParticleEnsemble& ensemble, std::size_t k) {
    std::vector<double> points(ensemble.size());
    for (std::size_t i = 0; i < ensemble.size(); ++i) points[i] = ensemble.state(i, k);
    return points;
}

void initialise(ParticleEnsemble& ensemble, double x0) {
    for (std::size_t i = 0; i < ensemble.size(); ++i) ensemble.state(i, 0) = x0;
}

}  // namespace

ParticleEnsemble simulate_particles_p(const ModelSpec& model, std::size_t n_particles, const TimeGrid& grid,
                                      double x0, std::uint64_t seed, const SimOptions& options) {
    validate(model);
    if (n_particles < 1) throw ConfigError("simulate_particles_p needs N >= 1");
    ParticleEnsemble ensemble(grid, n_particles, seed, MeasureLabel::p);
    initialise(ensemble, x0);
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);

    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        const double t = grid.time(k);
        const auto cloud = WeightedCloud::uniform(node_states(ensemble, k));
        const MeanField field(model, t, cloud);
        std::atomic<bool> exploded{false};
        parallel_for(n_particles, options.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const double x = ensemble.state(i, k);
                const double dw = brownian_increment(seed, i, k, sqrt_dt);
                ensemble.increment(i, k) = dw;
                const double next = x + field.drift(t, x) * dt + model.sigma * dw;
                ensemble.state(i, k + 1) = next;
                if (!std::isfinite(next)) exploded = true;
            }
        });
        if (exploded) throw_explosion(k);
    }
    return ensemble;
}

ParticleEnsemble simulate_decoupled_q(const ModelSpec& model, const MeasurePath& path, const ControlPath& h,
                                      std::size_t n_particles, const TimeGrid& grid, double x0,
                                      std::uint64_t seed, const SimOptions& options) {
    validate(model);
    if (n_particles < 1) throw ConfigError("simulate_decoupled_q needs N2 >= 1");
    if (!(path.grid() == grid)) throw ConfigError("measure path grid does not match the simulation grid");
    if (h.size() != grid.n_steps()) throw ConfigError("control length does not match the grid");
    if (!h.all_finite()) throw ConfigError("control contains non-finite entries");

    ParticleEnsemble ensemble(grid, n_particles, seed, MeasureLabel::q_decoupled);
    initialise(ensemble, x0);
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);

    std::vector<MeanField> fields;
    fields.reserve(grid.n_steps());
    for (std::size_t k = 0; k < grid.n_steps(); ++k) fields.emplace_back(model, grid.time(k), path.at_node(k));

    std::vector<std::size_t> failed_at(n_particles, kNoFailure);
    parallel_for(n_particles, options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double x = x0;
            double log_weight = 0.0;
            for (std::size_t k = 0; k < grid.n_steps(); ++k) {
                const double hk = h.hdot[k];
                const double dw = brownian_increment(seed, i, k, sqrt_dt);
                ensemble.increment(i, k) = dw;
                x = x + (fields[k].drift(grid.time(k), x) + model.sigma * hk) * dt + model.sigma * dw;
                ensemble.state(i, k + 1) = x;
                log_weight += -hk * dw - 0.5 * hk * hk * dt;
                if (!std::isfinite(x) && failed_at[i] == kNoFailure) failed_at[i] = k;
            }
            ensemble.log_weights()[i] = log_weight;
            ensemble.weights()[i] = std::exp(log_weight);
        }
    });
    const std::size_t first = *std::min_element(failed_at.begin(), failed_at.end());
    if (first != kNoFailure) throw_explosion(first);
    return ensemble;
}

ParticleEnsemble simulate_complete_q(const ModelSpec& model, const ControlPath& h, std::size_t n_particles,
                                     const TimeGrid& grid, double x0, std::uint64_t seed,
                                     const SimOptions& options) {
    validate(model);
    if (n_particles < 2) throw ConfigError("simulate_complete_q needs N >= 2");
    if (h.size() != grid.n_steps()) throw ConfigError("control length does not match the grid");
    if (!h.all_finite()) throw ConfigError("control contains non-finite entries");

    ParticleEnsemble ensemble(grid, n_particles, seed, MeasureLabel::q_complete);
    initialise(ensemble, x0);
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);
    std::vector<double> log_z(n_particles, 0.0);
    std::vector<double> z(n_particles, 1.0);

    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        const double t = grid.time(k);
        const double hk = h.hdot[k];
        if (std::accumulate(z.begin(), z.end(), 0.0) < 1e-280)
            throw SimulationError("degenerate likelihood at step " + std::to_string(k), k);
        const WeightedCloud cloud(node_states(ensemble, k), z, Normalization::raw_average);
        const MeanField field(model, t, cloud);
        std::atomic<bool> exploded{false};
        parallel_for(n_particles, options.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const double x = ensemble.state(i, k);
                const double dw = brownian_increment(seed, i, k, sqrt_dt);
                ensemble.increment(i, k) = dw;
                const double next = x + (field.drift(t, x) + model.sigma * hk) * dt + model.sigma * dw;
                ensemble.state(i, k + 1) = next;
                if (!std::isfinite(next)) exploded = true;
                log_z[i] += -hk * dw - 0.5 * hk * hk * dt;
                z[i] = std::exp(log_z[i]);
            }
        });
        if (exploded) throw_explosion(k);
    }
    if (std::accumulate(z.begin(), z.end(), 0.0) < 1e-280)
        throw SimulationError("degenerate likelihood at step " + std::to_string(grid.n_steps()), grid.n_steps());
    for (std::size_t i = 0; i < n_particles; ++i) {
        ensemble.log_weights()[i] = log_z[i];
        ensemble.weights()[i] = z[i];
    }
    return ensemble;
}

void write_ensemble_csv(std::ostream& out, const ParticleEnsemble& ensemble) {
    out << "step,particle,state,weight\n";
    const auto weights = ensemble.weights();
    for (std::size_t k = 0; k <= ensemble.grid().n_steps(); ++k)
        for (std::size_t i = 0; i < ensemble.size(); ++i)
            out << k << ',' << i << ',' << format_real(ensemble.state(i, k)) << ',' << format_real(weights[i])
                << '\n';
}

}  // namespace mvis
