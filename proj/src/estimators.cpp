#include "mvis/estimators.hpp"

#include "mvis/errors.hpp"
#include "mvis/format.hpp"
#include "mvis/parallel.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace mvis {

EstimatorReport estimate(const ParticleEnsemble& ensemble, const Payoff& payoff) {
    const std::size_t n = ensemble.size();
    const auto weights = ensemble.weights();
    std::vector<double> contributions(n);
    double weight_sum = 0.0;
    double weight_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        contributions[i] = weights[i] * payoff.value(ensemble.terminal(i));
        weight_sum += weights[i];
        weight_sq += weights[i] * weights[i];
    }
    double mean = 0.0;
    for (double c : contributions) mean += c;
    mean /= static_cast<double>(n);
    double sq = 0.0;
    for (double c : contributions) sq += (c - mean) * (c - mean);

    EstimatorReport report;
    report.algorithm = std::string(to_string(ensemble.label()));
    report.n = n;
    report.seed = ensemble.seed();
    report.estimate = mean;
    report.std_error = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n)) : 0.0;
    report.ess = weight_sq > 0.0 ? weight_sum * weight_sum / weight_sq : 0.0;
    return report;
}

ChaosReport chaos_error_experiment(const ModelSpec& model, const Payoff& payoff, std::size_t n_particles,
                                   std::size_t repetitions, const TimeGrid& grid, double x0, std::uint64_t seed,
                                   const SimOptions& options) {
    if (repetitions < 1) throw ConfigError("chaos experiment needs M >= 1");
    const auto start = std::chrono::steady_clock::now();
    ChaosReport report;
    report.n = n_particles;
    report.repetitions = repetitions;
    report.seed = seed;
    report.runs.resize(repetitions);
    const SimOptions inner{1};
    parallel_for(repetitions, options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const auto ensemble =
                simulate_particles_p(model, n_particles, grid, x0, repetition_seed(seed, r), inner);
            report.runs[r] = estimate(ensemble, payoff);
        }
    });
    double sum_est = 0.0;
    double sum_err = 0.0;
    for (const auto& run : report.runs) {
        sum_est += run.estimate;
        sum_err += run.std_error;
    }
    const double m = static_cast<double>(repetitions);
    report.mean_estimate = sum_est / m;
    report.mean_std_error = sum_err / m;
    if (repetitions > 1) {
        double sq = 0.0;
        for (const auto& run : report.runs) sq += (run.estimate - report.mean_estimate) * (run.estimate - report.mean_estimate);
        report.cross_rep_std = std::sqrt(sq / (m - 1.0));
    }
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

void write_report_header(std::ostream& out) { out << "algorithm,N,estimate,std_error,ess,wall_time_s,seed\n"; }

void write_report_row(std::ostream& out, const EstimatorReport& report) {
    out << report.algorithm << ',' << report.n << ',' << format_real(report.estimate) << ','
        << format_real(report.std_error) << ',' << format_real(report.ess) << ','
        << format_real(report.wall_time_s) << ',' << report.seed << '\n';
}

}  // namespace mvis
