#include "mvis/experiment.hpp"

#include "mvis/errors.hpp"
#include "mvis/format.hpp"
#include "mvis/measures.hpp"
#include "mvis/parallel.hpp"
#include "mvis/rng.hpp"
#include "mvis/sim.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace mvis {

Algorithm parse_algorithm(const std::string& text) {
    if (text == "mc") return Algorithm::mc;
    if (text == "decoupled") return Algorithm::decoupled;
    if (text == "complete") return Algorithm::complete;
    if (text == "all") return Algorithm::all;
    throw ConfigError("unknown algorithm '" + text + "' (expected mc, decoupled, complete or all)");
}

std::string to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::mc: return "mc";
        case Algorithm::decoupled: return "decoupled";
        case Algorithm::complete: return "complete";
        case Algorithm::all: return "all";
    }
    return "all";
}

namespace {

namespace pt = boost::property_tree;

double parse_real(const std::string& key, const std::string& text) {
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
        throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
    return value;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
    // Accepts 10000 as well as 1e4.
    const double value = parse_real(key, text);
    if (!(value >= 0.0) || value != std::floor(value) || value > 1e15)
        throw ConfigError("'" + key + "': expected a non-negative integer, got '" + text + "'");
    return static_cast<std::size_t>(value);
}

std::uint64_t parse_seed(const std::string& key, const std::string& text) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("'" + key + "': expected an unsigned integer seed, got '" + text + "'");
    try {
        return std::stoull(text);
    } catch (const std::out_of_range&) {
        throw ConfigError("'" + key + "': seed out of range");
    }
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("'" + key + "': expected true or false, got '" + text + "'");
}

void read_named_section(const pt::ptree& tree, const std::string& section, std::string& name, Params& params) {
    const auto node = tree.get_child_optional(section);
    if (!node) return;
    Params parsed;
    bool named = false;
    for (const auto& [key, child] : *node) {
        const std::string value = child.get_value<std::string>();
        if (key == "name") {
            name = value;
            named = true;
        } else {
            parsed[key] = parse_real(section + "." + key, value);
        }
    }
    // A named section starts from that entry's own defaults.
    if (named) params.clear();
    for (const auto& [key, value] : parsed) params[key] = value;
}

std::string stem_json(const std::string& out) {
    std::filesystem::path path(out);
    path.replace_extension(".json");
    return path.string();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_text_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    body(out);
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void dump_ensemble(const ExperimentConfig& config, const std::string& label, const ParticleEnsemble& ensemble) {
    if (config.dump_paths.empty()) return;
    write_text_file(config.dump_paths + "_" + label + ".csv",
                    [&](std::ostream& out) { write_ensemble_csv(out, ensemble); });
}

}  // namespace

std::uint64_t default_seed_from_env() {
    const char* text = std::getenv("MVIS_SEED");
    if (text == nullptr || *text == '\0') return kDefaultSeed;
    try {
        return parse_seed("MVIS_SEED", text);
    } catch (const ConfigError&) {
        return kDefaultSeed;
    }
}

ExperimentConfig parse_config(std::istream& in, std::uint64_t fallback_seed) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    static const std::set<std::string> sections{"model", "payoff", "run"};
    for (const auto& [key, child] : tree)
        if (!sections.count(key) || child.empty())
            throw ConfigError("unexpected config entry '" + key + "' (sections are [model], [payoff], [run])");

    ExperimentConfig config;
    config.seed = fallback_seed;
    read_named_section(tree, "model", config.model, config.model_params);
    read_named_section(tree, "payoff", config.payoff, config.payoff_params);

    if (const auto run = tree.get_child_optional("run")) {
        for (const auto& [key, child] : *run) {
            const std::string value = child.get_value<std::string>();
            const std::string where = "run." + key;
            if (key == "x0") config.x0 = parse_real(where, value);
            else if (key == "T") config.horizon = parse_real(where, value);
            else if (key == "n_steps") config.n_steps = parse_count(where, value);
            else if (key == "N") config.n = parse_count(where, value);
            else if (key == "N2") config.n2 = parse_count(where, value);
            else if (key == "M") config.m = parse_count(where, value);
            else if (key == "algorithm") config.algorithm = parse_algorithm(value);
            else if (key == "seed") config.seed = parse_seed(where, value);
            else if (key == "out") config.out = value;
            else if (key == "check_optimality") config.check_optimality = parse_bool(where, value);
            else if (key == "optimality_tol") config.optimality_tol = parse_real(where, value);
            else if (key == "threads") config.threads = static_cast<unsigned>(parse_count(where, value));
            else if (key == "dump_paths") config.dump_paths = value;
            else if (key == "law_in") config.law_in = value;
            else if (key == "law_out") config.law_out = value;
            else if (key == "timing") config.timing = parse_bool(where, value);
            else throw ConfigError("unknown key '" + key + "' in [run]");
        }
    }
    return config;
}

ExperimentConfig load_config_file(const std::string& path, std::uint64_t fallback_seed) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, fallback_seed);
}

void validate(const ExperimentConfig& config) {
    if (!(config.horizon > 0.0) || !std::isfinite(config.horizon)) throw ConfigError("T must be positive");
    if (config.n_steps < 1) throw ConfigError("n_steps must be at least 1");
    if (config.n < 1) throw ConfigError("N must be at least 1");
    if (config.n2 && *config.n2 < 1) throw ConfigError("N2 must be at least 1");
    if (config.m < 1) throw ConfigError("M must be at least 1");
    if (!std::isfinite(config.x0)) throw ConfigError("x0 must be finite");
    if (!(config.optimality_tol > 0.0)) throw ConfigError("optimality_tol must be positive");
    if ((config.algorithm == Algorithm::complete || config.algorithm == Algorithm::all) && config.n < 2)
        throw ConfigError("the complete algorithm needs N >= 2");
    (void)make_model(config.model, config.model_params);
    (void)make_payoff(config.payoff, config.payoff_params);
}

std::string describe(const ExperimentConfig& config) {
    std::ostringstream out;
    out << "[model]\nname = " << config.model << '\n';
    for (const auto& [key, value] : config.model_params) out << key << " = " << format_real(value) << '\n';
    out << "\n[payoff]\nname = " << config.payoff << '\n';
    for (const auto& [key, value] : config.payoff_params) out << key << " = " << format_real(value) << '\n';
    out << "\n[run]\n";
    out << "x0 = " << format_real(config.x0) << '\n';
    out << "T = " << format_real(config.horizon) << '\n';
    out << "n_steps = " << config.n_steps << '\n';
    out << "N = " << config.n << '\n';
    out << "N2 = " << config.second_run_size() << '\n';
    out << "M = " << config.m << '\n';
    out << "algorithm = " << to_string(config.algorithm) << '\n';
    out << "seed = " << config.seed << '\n';
    out << "out = " << config.out << '\n';
    out << "check_optimality = " << (config.check_optimality ? "true" : "false") << '\n';
    out << "optimality_tol = " << format_real(config.optimality_tol) << '\n';
    out << "threads = " << config.threads << '\n';
    if (!config.dump_paths.empty()) out << "dump_paths = " << config.dump_paths << '\n';
    if (!config.law_in.empty()) out << "law_in = " << config.law_in << '\n';
    if (!config.law_out.empty()) out << "law_out = " << config.law_out << '\n';
    out << "timing = " << (config.timing ? "true" : "false") << '\n';
    return out.str();
}

std::uint64_t decoupled_phase2_seed(std::uint64_t seed) { return mix_seed(seed, 1); }
std::uint64_t complete_seed(std::uint64_t seed) { return mix_seed(seed, 2); }

ExperimentResult run_pipeline(const ExperimentConfig& config) {
    validate(config);
    const ModelSpec model = make_model(config.model, config.model_params);
    const Payoff payoff = make_payoff(config.payoff, config.payoff_params);
    const TimeGrid grid = config.grid();
    const SimOptions sim{config.threads};
    const bool want_mc = config.algorithm == Algorithm::mc || config.algorithm == Algorithm::all;
    const bool want_decoupled = config.algorithm == Algorithm::decoupled || config.algorithm == Algorithm::all;
    const bool want_complete = config.algorithm == Algorithm::complete || config.algorithm == Algorithm::all;
    const double clock = config.timing ? 1.0 : 0.0;

    ExperimentResult result;
    std::optional<ParticleEnsemble> p_run;
    double p_time = 0.0;
    if (want_mc || (want_decoupled && config.law_in.empty())) {
        const auto start = std::chrono::steady_clock::now();
        p_run.emplace(simulate_particles_p(model, config.n, grid, config.x0, config.seed, sim));
        p_time = seconds_since(start);
    }

    if (want_mc) {
        auto report = estimate(*p_run, payoff);
        report.algorithm = "mc";
        report.seed = config.seed;
        report.wall_time_s = clock * p_time;
        result.reports.push_back(report);
        dump_ensemble(config, "mc", *p_run);
    }

    if (want_decoupled) {
        std::optional<MeasurePath> law;
        double phase1 = 0.0;
        if (!config.law_in.empty()) {
            std::ifstream in(config.law_in);
            if (!in) throw ConfigError("cannot open frozen law '" + config.law_in + "'");
            law.emplace(read_measure_path_csv(in, grid));
        } else {
            law.emplace(freeze_measure_path(*p_run));
            phase1 = p_time;
        }
        if (!config.law_out.empty())
            write_text_file(config.law_out, [&](std::ostream& out) { write_measure_path_csv(out, *law); });

        auto start = std::chrono::steady_clock::now();
        result.decoupled_bvp = solve_bvp_decoupled(model, *law, payoff, grid, config.x0);
        result.decoupled_solve_s = clock * seconds_since(start);

        start = std::chrono::steady_clock::now();
        const auto q_run = simulate_decoupled_q(model, *law, result.decoupled_bvp->control, config.second_run_size(),
                                                grid, config.x0, decoupled_phase2_seed(config.seed), sim);
        result.decoupled_sim_s = clock * (phase1 + seconds_since(start));

        auto report = estimate(q_run, payoff);
        report.seed = config.seed;
        report.wall_time_s = result.decoupled_solve_s + result.decoupled_sim_s;
        result.reports.push_back(report);
        dump_ensemble(config, "decoupled", q_run);

        if (config.check_optimality)
            result.decoupled_gap = optimality_check_decoupled(model, *law, payoff, result.decoupled_bvp->control,
                                                              grid, config.x0, config.optimality_tol);
    }

    if (want_complete) {
        auto start = std::chrono::steady_clock::now();
        result.complete_bvp = solve_bvp_complete(model, payoff, config.n, grid, config.x0);
        result.complete_solve_s = clock * seconds_since(start);

        start = std::chrono::steady_clock::now();
        const auto q_run = simulate_complete_q(model, result.complete_bvp->control, config.n, grid, config.x0,
                                               complete_seed(config.seed), sim);
        result.complete_sim_s = clock * seconds_since(start);

        auto report = estimate(q_run, payoff);
        report.seed = config.seed;
        report.wall_time_s = result.complete_solve_s + result.complete_sim_s;
        result.reports.push_back(report);
        dump_ensemble(config, "complete", q_run);

        if (config.check_optimality)
            result.complete_gap = optimality_check_complete(model, config.n, payoff, result.complete_bvp->control,
                                                            result.complete_bvp->control_hat, grid, config.x0,
                                                            config.optimality_tol);
    }
    return result;
}

namespace {

nlohmann::json report_json(const EstimatorReport& r) {
    return {{"algorithm", r.algorithm}, {"N", r.n},           {"estimate", r.estimate},
            {"std_error", r.std_error}, {"ess", r.ess},       {"wall_time_s", r.wall_time_s},
            {"seed", r.seed}};
}

nlohmann::json result_json(const ExperimentConfig& config, const ExperimentResult& result) {
    nlohmann::json j;
    j["config"] = describe(config);
    j["reports"] = nlohmann::json::array();
    for (const auto& r : result.reports) j["reports"].push_back(report_json(r));
    if (result.decoupled_bvp) {
        j["decoupled"]["bvp"] = to_json(*result.decoupled_bvp);
        j["decoupled"]["solve_time_s"] = result.decoupled_solve_s;
        j["decoupled"]["simulation_time_s"] = result.decoupled_sim_s;
        j["decoupled"]["phase2_seed"] = decoupled_phase2_seed(config.seed);
        if (result.decoupled_gap) j["decoupled"]["optimality"] = to_json(*result.decoupled_gap);
    }
    if (result.complete_bvp) {
        j["complete"]["bvp"] = to_json(*result.complete_bvp);
        j["complete"]["solve_time_s"] = result.complete_solve_s;
        j["complete"]["simulation_time_s"] = result.complete_sim_s;
        j["complete"]["simulation_seed"] = complete_seed(config.seed);
        if (result.complete_gap) j["complete"]["optimality"] = to_json(*result.complete_gap);
    }
    return j;
}

void log_gap(std::ostream& log, const GapReport& gap) {
    log << "optimality (" << gap.scope << "): L(h) = " << format_real(gap.l_value)
        << ", simplified = " << format_real(gap.simplified_value) << ", relative gap = "
        << format_real(gap.relative_gap) << (gap.certified ? " <= " : " > ") << format_real(gap.tolerance)
        << (gap.certified ? " (certified)" : " (not certified)") << '\n';
}

/// Maps library exceptions onto exit codes.
int guarded(std::ostream& log, const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        log << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const SolverError& e) {
        log << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const DomainError& e) {
        log << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const SimulationError& e) {
        log << "simulation failure: " << e.what() << '\n';
        return kExitSimulation;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
    return guarded(log, [&] {
        log << describe(config) << '\n';
        const auto result = run_pipeline(config);
        write_text_file(config.out, [&](std::ostream& out) {
            write_report_header(out);
            for (const auto& r : result.reports) write_report_row(out, r);
        });
        write_text_file(stem_json(config.out),
                        [&](std::ostream& out) { out << result_json(config, result).dump(2) << '\n'; });
        for (const auto& r : result.reports)
            log << r.algorithm << ": estimate " << format_real(r.estimate) << ", std_error "
                << format_real(r.std_error) << ", ess " << format_real(r.ess) << '\n';
        if (result.decoupled_bvp)
            log << "decoupled: solve " << format_real(result.decoupled_solve_s) << " s, simulation "
                << format_real(result.decoupled_sim_s) << " s\n";
        if (result.complete_bvp)
            log << "complete: solve " << format_real(result.complete_solve_s) << " s, simulation "
                << format_real(result.complete_sim_s) << " s\n";
        if (result.decoupled_gap) log_gap(log, *result.decoupled_gap);
        if (result.complete_gap) log_gap(log, *result.complete_gap);
        log << "wrote " << config.out << " and " << stem_json(config.out) << '\n';
    });
}

int check_optimality(const ExperimentConfig& config, std::ostream& log) {
    return guarded(log, [&] {
        log << describe(config) << '\n';
        auto run = config;
        run.check_optimality = true;
        // The gap check needs the candidate controls; the plain run adds nothing.
        if (run.algorithm == Algorithm::mc) throw ConfigError("check-optimality needs decoupled, complete or all");
        if (run.algorithm == Algorithm::all) run.algorithm = Algorithm::decoupled;
        validate(run);
        const ModelSpec model = make_model(run.model, run.model_params);
        const Payoff payoff = make_payoff(run.payoff, run.payoff_params);
        const TimeGrid grid = run.grid();

        nlohmann::json j;
        j["config"] = describe(run);
        if (run.algorithm == Algorithm::decoupled) {
            std::optional<MeasurePath> law;
            if (!run.law_in.empty()) {
                std::ifstream in(run.law_in);
                if (!in) throw ConfigError("cannot open frozen law '" + run.law_in + "'");
                law.emplace(read_measure_path_csv(in, grid));
            } else {
                law.emplace(freeze_measure_path(
                    simulate_particles_p(model, run.n, grid, run.x0, run.seed, SimOptions{run.threads})));
            }
            const auto bvp = solve_bvp_decoupled(model, *law, payoff, grid, run.x0);
            const auto gap = optimality_check_decoupled(model, *law, payoff, bvp.control, grid, run.x0,
                                                        run.optimality_tol);
            j["decoupled"]["bvp"] = to_json(bvp);
            j["decoupled"]["optimality"] = to_json(gap);
            log_gap(log, gap);
        } else {
            const auto bvp = solve_bvp_complete(model, payoff, run.n, grid, run.x0);
            const auto gap = optimality_check_complete(model, run.n, payoff, bvp.control, bvp.control_hat, grid,
                                                       run.x0, run.optimality_tol);
            j["complete"]["bvp"] = to_json(bvp);
            j["complete"]["optimality"] = to_json(gap);
            log_gap(log, gap);
        }
        write_text_file(run.out, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
        log << "wrote " << run.out << '\n';
    });
}

TableKind parse_table(const std::string& text) {
    if (text == "table1") return TableKind::table1;
    if (text == "table2") return TableKind::table2;
    if (text == "chaos") return TableKind::chaos;
    throw ConfigError("unknown table '" + text + "' (expected table1, table2 or chaos)");
}

std::vector<std::size_t> table_particle_counts() { return {1000, 5000, 10000, 50000, 100000}; }

namespace {

struct Cell {
    double estimate = std::numeric_limits<double>::quiet_NaN();
    double std_error = std::numeric_limits<double>::quiet_NaN();
    double time = std::numeric_limits<double>::quiet_NaN();
    double solve = std::numeric_limits<double>::quiet_NaN();
};

struct Row {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    Cell mc, decoupled, complete;
    std::string failure;
};

/// Runs one algorithm of a table row on its own so a failure in one column
/// leaves the others intact.
Cell run_cell(ExperimentConfig config, Algorithm algorithm, std::string& failure) {
    config.algorithm = algorithm;
    config.check_optimality = false;
    config.dump_paths.clear();
    config.law_in.clear();
    config.law_out.clear();
    config.threads = 1;
    Cell cell;
    std::ostringstream sink;
    const int code = guarded(sink, [&] {
        const auto result = run_pipeline(config);
        const auto& r = result.reports.back();
        cell.estimate = r.estimate;
        cell.std_error = r.std_error;
        cell.time = r.wall_time_s;
        if (algorithm == Algorithm::decoupled) cell.solve = result.decoupled_solve_s;
        if (algorithm == Algorithm::complete) cell.solve = result.complete_solve_s;
    });
    if (code != kExitOk) failure += to_string(algorithm) + ": " + sink.str();
    return cell;
}

}  // namespace

int reproduce_tables(TableKind which, const ExperimentConfig& base, std::ostream& csv, std::ostream& log,
                     const TableSweep& sweep) {
    return guarded(log, [&] {
        ExperimentConfig config = base;
        if (which == TableKind::chaos) {
            const auto counts = sweep.counts.empty() ? std::vector<std::size_t>{5000} : sweep.counts;
            if (sweep.repetitions < 1) throw ConfigError("M must be at least 1");
            validate(config);
            const ModelSpec model = make_model(config.model, config.model_params);
            const Payoff payoff = make_payoff(config.payoff, config.payoff_params);
            log << describe(config) << '\n';
            csv << "N,M,mean_estimate,mean_std_error,cross_rep_std,wall_time_s,seed\n";
            for (std::size_t r = 0; r < counts.size(); ++r) {
                const std::uint64_t seed = config.seed + r;
                const auto rep = chaos_error_experiment(model, payoff, counts[r], sweep.repetitions, config.grid(),
                                                        config.x0, seed, SimOptions{config.threads});
                const double time = config.timing ? rep.wall_time_s : 0.0;
                csv << counts[r] << ',' << sweep.repetitions << ',' << format_real(rep.mean_estimate) << ','
                    << format_real(rep.mean_std_error) << ',' << format_real(rep.cross_rep_std) << ','
                    << format_real(time) << ',' << seed << '\n';
                log << "chaos N=" << counts[r] << " M=" << sweep.repetitions << ": mean estimate "
                    << format_real(rep.mean_estimate) << ", mean std_error " << format_real(rep.mean_std_error)
                    << '\n';
            }
            return;
        }

        if (which == TableKind::table1) {
            config.payoff = "exp";
            config.payoff_params = {{"a", 0.5}, {"b", 10.0}};
        } else {
            config.payoff = "tanh";
            config.payoff_params = {{"a", 15.0}, {"b", 1.0}};
        }
        config.n2.reset();
        validate(config);
        log << describe(config) << '\n';

        const auto counts = sweep.counts.empty() ? table_particle_counts() : sweep.counts;
        std::vector<Row> rows(counts.size());
        parallel_for(rows.size(), config.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t r = begin; r < end; ++r) {
                ExperimentConfig cell = config;
                cell.n = counts[r];
                cell.seed = config.seed + r;
                rows[r].n = counts[r];
                rows[r].seed = cell.seed;
                rows[r].mc = run_cell(cell, Algorithm::mc, rows[r].failure);
                rows[r].decoupled = run_cell(cell, Algorithm::decoupled, rows[r].failure);
                rows[r].complete = run_cell(cell, Algorithm::complete, rows[r].failure);
            }
        });

        if (which == TableKind::table1)
            csv << "N,mc_payoff,mc_error,mc_time,decoupled_payoff,decoupled_error,decoupled_time,"
                   "decoupled_solve_time,complete_payoff,complete_error,complete_time,complete_solve_time,seed\n";
        else
            csv << "N,mc_payoff,mc_error,decoupled_payoff,decoupled_error,complete_payoff,complete_error,seed\n";
        for (const auto& row : rows) {
            const auto f = [](double v) { return format_real(v); };
            csv << row.n << ',' << f(row.mc.estimate) << ',' << f(row.mc.std_error) << ',';
            if (which == TableKind::table1) csv << f(row.mc.time) << ',';
            csv << f(row.decoupled.estimate) << ',' << f(row.decoupled.std_error) << ',';
            if (which == TableKind::table1) csv << f(row.decoupled.time) << ',' << f(row.decoupled.solve) << ',';
            csv << f(row.complete.estimate) << ',' << f(row.complete.std_error) << ',';
            if (which == TableKind::table1) csv << f(row.complete.time) << ',' << f(row.complete.solve) << ',';
            csv << row.seed << '\n';
            if (!row.failure.empty()) log << "N=" << row.n << " failures:\n" << row.failure;
        }
    });
}

}  // namespace mvis
