#pragma once

#include "mvis/ensemble.hpp"
#include "mvis/models.hpp"
#include "mvis/sim.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mvis {

struct EstimatorReport {
    std::string algorithm;
    std::size_t n = 0;
    double estimate = 0.0;
    /// Sample standard deviation of the per-particle contributions over sqrt(N).
    double std_error = 0.0;
    /// (sum Z)^2 / sum Z^2
    double ess = 0.0;
    double wall_time_s = 0.0;
    std::uint64_t seed = 0;
};

/// (1/N) sum_i w_i G(X_i(T)) and its statistics. The algorithm label is
/// derived from the ensemble's measure label.
EstimatorReport estimate(const ParticleEnsemble& ensemble, const Payoff& payoff);

struct ChaosReport {
    std::size_t n = 0;
    std::size_t repetitions = 0;
    std::uint64_t seed = 0;
    double mean_estimate = 0.0;
    double mean_std_error = 0.0;
    /// Sample standard deviation of the M estimates (0 when M == 1).
    double cross_rep_std = 0.0;
    double wall_time_s = 0.0;
    std::vector<EstimatorReport> runs;
};

/// Seed used by repetition r of the chaos experiment.
inline std::uint64_t repetition_seed(std::uint64_t seed, std::size_t r) { return seed + r; }

/// M independent plain particle runs; repetitions are distributed over
/// `options.threads` workers, each run itself single threaded.
ChaosReport chaos_error_experiment(const ModelSpec& model, const Payoff& payoff, std::size_t n_particles,
                                   std::size_t repetitions, const TimeGrid& grid, double x0, std::uint64_t seed,
                                   const SimOptions& options = {});

/// Header `algorithm,N,estimate,std_error,ess,wall_time_s,seed`.
void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const EstimatorReport& report);

}  // namespace mvis
