#pragma once

#include "mvis/ensemble.hpp"
#include "mvis/measures.hpp"
#include "mvis/models.hpp"
#include "mvis/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>

namespace mvis {

struct SimOptions {
    /// Worker threads for particle-level loops; 0 means hardware concurrency.
    unsigned threads = 1;
};

/// Interacting particle system under P, Euler-Maruyama.
ParticleEnsemble simulate_particles_p(const ModelSpec& model, std::size_t n_particles, const TimeGrid& grid,
                                      double x0, std::uint64_t seed, const SimOptions& options = {});

/// Independent paths driven by the frozen law `path`, shifted by sigma*hdot,
/// with weights exp(-sum hdot dW - 1/2 sum hdot^2 dt).
ParticleEnsemble simulate_decoupled_q(const ModelSpec& model, const MeasurePath& path, const ControlPath& h,
                                      std::size_t n_particles, const TimeGrid& grid, double x0,
                                      std::uint64_t seed, const SimOptions& options = {});

/// Interacting system under Q where the interaction sees the likelihood
/// weighted law (1/N) sum_j Z_j delta_{X_j}.
ParticleEnsemble simulate_complete_q(const ModelSpec& model, const ControlPath& h, std::size_t n_particles,
                                     const TimeGrid& grid, double x0, std::uint64_t seed,
                                     const SimOptions& options = {});

/// Increment of particle i over cell k under the simulation measure.
inline double brownian_increment(std::uint64_t seed, std::size_t i, std::size_t k, double sqrt_dt) {
    return sqrt_dt * stream_normal(seed, i, k);
}

/// CSV with header `step,particle,state,weight`; the terminal weight is
/// repeated on every row of a path.
void write_ensemble_csv(std::ostream& out, const ParticleEnsemble& ensemble);

}  // namespace mvis

