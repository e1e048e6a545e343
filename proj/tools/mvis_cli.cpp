#include "mvis/errors.hpp"
#include "mvis/experiment.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> algorithm;
    std::optional<std::size_t> n;
    std::optional<std::size_t> n2;
    std::optional<std::size_t> m;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
    std::optional<std::string> dump_paths;
    std::optional<std::string> law_in;
    std::optional<std::string> law_out;
    std::optional<double> optimality_tol;
    bool check_optimality = false;
    bool no_timing = false;
};

void add_common(CLI::App& app, Overrides& o) {
    app.add_option("--config", o.config_path, "INI config file ([model], [payoff], [run])");
    app.add_option("--seed", o.seed, "base seed (default: config, then MVIS_SEED, then 20190417)");
    app.add_option("--algorithm", o.algorithm, "mc, decoupled, complete or all");
    app.add_option("--N", o.n, "particles in the (first) run");
    app.add_option("--N2", o.n2, "particles in the second decoupled run");
    app.add_option("--M", o.m, "repetitions for the chaos experiment");
    app.add_option("--out", o.out, "output path");
    app.add_option("--threads", o.threads, "worker threads, 0 for all cores");
    app.add_option("--dump-paths", o.dump_paths, "write particle paths to PREFIX_<algorithm>.csv");
    app.add_option("--law-in", o.law_in, "read the frozen law for the decoupled run from CSV");
    app.add_option("--law-out", o.law_out, "write the frozen law of the first decoupled phase to CSV");
    app.add_option("--optimality-tol", o.optimality_tol, "relative gap that certifies optimality");
    app.add_flag("--no-timing", o.no_timing, "write wall_time_s as 0 for byte-stable reports");
}

mvis::ExperimentConfig resolve(const Overrides& o) {
    const std::uint64_t fallback = mvis::default_seed_from_env();
    mvis::ExperimentConfig config;
    config.seed = fallback;
    if (!o.config_path.empty()) config = mvis::load_config_file(o.config_path, fallback);
    if (o.seed) config.seed = *o.seed;
    if (o.algorithm) config.algorithm = mvis::parse_algorithm(*o.algorithm);
    if (o.n) config.n = *o.n;
    if (o.n2) config.n2 = *o.n2;
    if (o.m) config.m = *o.m;
    if (o.out) config.out = *o.out;
    if (o.threads) config.threads = *o.threads;
    if (o.dump_paths) config.dump_paths = *o.dump_paths;
    if (o.law_in) config.law_in = *o.law_in;
    if (o.law_out) config.law_out = *o.law_out;
    if (o.optimality_tol) config.optimality_tol = *o.optimality_tol;
    if (o.check_optimality) config.check_optimality = true;
    if (o.no_timing) config.timing = false;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Importance sampling for McKean-Vlasov particle systems"};
    app.require_subcommand(1);

    Overrides run_opts;
    auto* run = app.add_subcommand("run", "run mc / decoupled / complete and write CSV + JSON reports");
    add_common(*run, run_opts);
    run->add_flag("--check-optimality", run_opts.check_optimality, "also run the asymptotic optimality check");

    Overrides table_opts;
    std::string table_name;
    auto* tables = app.add_subcommand("tables", "reproduce table1, table2 or the chaos experiment");
    tables->add_option("which", table_name, "table1, table2 or chaos")->required();
    add_common(*tables, table_opts);

    Overrides check_opts;
    auto* check = app.add_subcommand("check-optimality", "solve the BVP and report the optimality gap");
    add_common(*check, check_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mvis::kExitConfig;
    }

    try {
        if (run->parsed()) return mvis::run_experiment(resolve(run_opts), std::cerr);

        if (check->parsed()) {
            auto config = resolve(check_opts);
            if (!check_opts.out && check_opts.config_path.empty()) config.out = "mvis_optimality.json";
            return mvis::check_optimality(config, std::cerr);
        }

        const auto which = mvis::parse_table(table_name);
        auto config = resolve(table_opts);
        mvis::TableSweep sweep;
        if (table_opts.n) sweep.counts = {*table_opts.n};
        if (table_opts.m) sweep.repetitions = *table_opts.m;
        if (!table_opts.out) config.out = table_name + ".csv";
        std::ofstream csv(config.out);
        if (!csv) {
            std::cerr << "error: cannot open '" << config.out << "' for writing\n";
            return mvis::kExitConfig;
        }
        const int code = mvis::reproduce_tables(which, config, csv, std::cerr, sweep);
        std::cerr << "wrote " << config.out << '\n';
        return code;
    } catch (const mvis::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return mvis::kExitConfig;
    }
}
