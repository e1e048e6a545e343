#pragma once

#include "mvis/control.hpp"
#include "mvis/estimators.hpp"
#include "mvis/models.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mvis {

enum class Algorithm { mc, decoupled, complete, all };

Algorithm parse_algorithm(const std::string& text);
std::string to_string(Algorithm algorithm);

inline constexpr std::uint64_t kDefaultSeed = 20190417;

/// Everything needed to reproduce a run. Defaults are the Kuramoto set-up
/// with the exponential payoff.
struct ExperimentConfig {
    std::string model = "kuramoto";
    Params model_params{{"K", 1.0}, {"sigma", 0.3}};
    std::string payoff = "exp";
    Params payoff_params{{"a", 0.5}, {"b", 10.0}};
    double x0 = 0.0;
    double horizon = 1.0;
    std::size_t n_steps = 50;
    std::size_t n = 1000;
    /// Particles in the second decoupled run; defaults to n.
    std::optional<std::size_t> n2;
    std::size_t m = 1;
    Algorithm algorithm = Algorithm::all;
    std::uint64_t seed = kDefaultSeed;
    std::string out = "mvis_report.csv";
    bool check_optimality = false;
    double optimality_tol = 1e-2;
    unsigned threads = 1;
    /// Prefix for per-algorithm path dumps; empty disables.
    std::string dump_paths;
    /// Optional frozen-law CSV to load instead of running the first phase.
    std::string law_in;
    /// Optional destination for the frozen law of the first phase.
    std::string law_out;
    /// When false, wall_time_s is written as 0 so reports are byte-stable.
    bool timing = true;

    std::size_t second_run_size() const { return n2.value_or(n); }
    TimeGrid grid() const { return TimeGrid(horizon, n_steps); }
};

/// Seed used for a run when neither the config file nor --seed sets one:
/// MVIS_SEED if present and valid, else kDefaultSeed.
std::uint64_t default_seed_from_env();

/// Parses the INI-style config (`[model]`, `[payoff]`, `[run]` sections of
/// `key = value` lines). Unknown `[run]` keys are rejected.
ExperimentConfig parse_config(std::istream& in, std::uint64_t fallback_seed = kDefaultSeed);
ExperimentConfig load_config_file(const std::string& path, std::uint64_t fallback_seed = kDefaultSeed);

/// Throws ConfigError on invalid counts, horizon or keys.
void validate(const ExperimentConfig& config);

/// Fully resolved config in the same format parse_config reads.
std::string describe(const ExperimentConfig& config);

struct ExperimentResult {
    std::vector<EstimatorReport> reports;
    std::optional<BVPSolution> decoupled_bvp;
    std::optional<BVPSolution> complete_bvp;
    std::optional<GapReport> decoupled_gap;
    std::optional<GapReport> complete_gap;
    double decoupled_solve_s = 0.0;
    double complete_solve_s = 0.0;
    double decoupled_sim_s = 0.0;
    double complete_sim_s = 0.0;
};

/// Seed of the independent second (importance-sampled) decoupled run.
std::uint64_t decoupled_phase2_seed(std::uint64_t seed);
/// Seed of the complete measure-change run.
std::uint64_t complete_seed(std::uint64_t seed);

/// Executes the configured pipeline without touching the filesystem (except
/// `law_in`, `law_out` and `dump_paths` when set).
ExperimentResult run_pipeline(const ExperimentConfig& config);

/// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitSolver = 2, kExitSimulation = 3 };

/// run_pipeline plus report files: CSV rows at `config.out` and a JSON
/// companion (same stem, .json) with BVP solutions and gap reports.
int run_experiment(const ExperimentConfig& config, std::ostream& log);

/// Decoupled phase one, BVP and gap check only; JSON written to `config.out`.
int check_optimality(const ExperimentConfig& config, std::ostream& log);

enum class TableKind { table1, table2, chaos };

TableKind parse_table(const std::string& text);

/// Particle counts of the table sweeps.
std::vector<std::size_t> table_particle_counts();

struct TableSweep {
    /// Particle counts; empty means table_particle_counts() for the tables
    /// and {5000} for the chaos experiment.
    std::vector<std::size_t> counts;
    std::size_t repetitions = 1000;
};

/// Sweeps for the two result tables (exp / tanh payoff) or the repeated-run
/// chaos experiment. Model and horizon come from `base`; the payoff is fixed
/// by the table. Row r uses seed base.seed + r. Cells are spread over
/// base.threads workers, each cell single threaded. Returns an exit code.
int reproduce_tables(TableKind which, const ExperimentConfig& base, std::ostream& csv, std::ostream& log,
                     const TableSweep& sweep = {});

}  // namespace mvis
