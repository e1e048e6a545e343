#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mvis/errors.hpp"
#include "mvis/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mvis;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mvis_test_experiment";
    fs::create_directories(dir);
    return dir / name;
}

ExperimentConfig small(std::size_t n = 200) {
    ExperimentConfig c;
    c.n = n;
    c.timing = false;
    return c;
}

}  // namespace

TEST_CASE("config parsing") {
    std::istringstream in(R"(
; comment
[model]
name = kuramoto
K = 2

[payoff]
name = tanh
a = 15
b = 1

[run]
N = 1e4
N2 = 500
M = 3
T = 2
n_steps = 100
algorithm = decoupled
seed = 99
check_optimality = true
timing = false
)");
    const auto c = parse_config(in, 7);
    CHECK(c.model == "kuramoto");
    CHECK(c.model_params.at("K") == 2.0);
    CHECK(c.model_params.count("sigma") == 0);  // registry default applies
    CHECK(c.payoff == "tanh");
    CHECK(c.payoff_params.at("a") == 15.0);
    CHECK(c.n == 10000);
    CHECK(c.second_run_size() == 500);
    CHECK(c.m == 3);
    CHECK(c.horizon == 2.0);
    CHECK(c.n_steps == 100);
    CHECK(c.algorithm == Algorithm::decoupled);
    CHECK(c.seed == 99);
    CHECK(c.check_optimality);
    CHECK_FALSE(c.timing);

    std::istringstream empty("");
    const auto d = parse_config(empty, 7);
    CHECK(d.seed == 7);
    CHECK(d.second_run_size() == d.n);
    CHECK(d.model_params.at("sigma") == 0.3);
}

TEST_CASE("config errors") {
    for (const char* text : {"[run]\nN = -1\n", "[run]\nN = 2.5\n", "[run]\nbogus = 1\n", "[run]\nalgorithm = fast\n",
                             "[weird]\nx = 1\n", "[model]\nK = abc\n", "[run]\nseed = -4\n"}) {
        CAPTURE(text);
        std::istringstream in(text);
        CHECK_THROWS_AS(parse_config(in), ConfigError);
    }
    auto c = small();
    c.horizon = 0.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = small(1);
    CHECK_THROWS_AS(validate(c), ConfigError);  // complete needs N >= 2
    c.algorithm = Algorithm::mc;
    CHECK_NOTHROW(validate(c));
    c.model = "unknown";
    CHECK_THROWS_AS(validate(c), ConfigError);
    CHECK_THROWS_AS(load_config_file("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("describe round-trips through the parser") {
    auto c = small(321);
    c.model_params = {{"K", 1.25}, {"sigma", 0.1}};
    c.payoff = "constant";
    c.payoff_params = {{"c", 3.0}};
    c.seed = 5;
    c.n2 = 17;
    std::istringstream in(describe(c));
    const auto back = parse_config(in);
    CHECK(describe(back) == describe(c));
}

TEST_CASE("MVIS_SEED default") {
    ::setenv("MVIS_SEED", "1234", 1);
    CHECK(default_seed_from_env() == 1234);
    ::setenv("MVIS_SEED", "nope", 1);
    CHECK(default_seed_from_env() == kDefaultSeed);
    ::unsetenv("MVIS_SEED");
    CHECK(default_seed_from_env() == kDefaultSeed);
}

TEST_CASE("pipeline: constant payoff through mc") {
    auto c = small();
    c.algorithm = Algorithm::mc;
    c.payoff = "constant";
    c.payoff_params = {{"c", 4.0}};
    const auto r = run_pipeline(c);
    REQUIRE(r.reports.size() == 1);
    CHECK(r.reports[0].algorithm == "mc");
    CHECK(r.reports[0].estimate == doctest::Approx(4.0));
    CHECK(r.reports[0].std_error == 0.0);
    CHECK(r.reports[0].seed == c.seed);
}

TEST_CASE("pipeline: all algorithms, phase seeds and labels") {
    auto c = small(300);
    c.check_optimality = true;
    const auto r = run_pipeline(c);
    REQUIRE(r.reports.size() == 3);
    CHECK(r.reports[0].algorithm == "mc");
    CHECK(r.reports[1].algorithm == "decoupled");
    CHECK(r.reports[2].algorithm == "complete");
    for (const auto& rep : r.reports) {
        CHECK(rep.n == 300);
        CHECK(rep.seed == c.seed);
        CHECK(rep.wall_time_s == 0.0);
    }
    CHECK(r.reports[1].std_error < r.reports[0].std_error / 10.0);
    CHECK(r.decoupled_bvp->residual_norm <= 1e-8);
    CHECK(r.complete_bvp->residual_norm <= 1e-8);
    REQUIRE(r.decoupled_gap);
    REQUIRE(r.complete_gap);
    CHECK(r.decoupled_gap->certified);
    CHECK(decoupled_phase2_seed(c.seed) != c.seed);
    CHECK(complete_seed(c.seed) != decoupled_phase2_seed(c.seed));

    auto only = c;
    only.algorithm = Algorithm::decoupled;
    only.check_optimality = false;
    const auto d = run_pipeline(only);
    REQUIRE(d.reports.size() == 1);
    CHECK(d.reports[0].estimate == r.reports[1].estimate);
}

TEST_CASE("N2 sets the second decoupled run size") {
    auto c = small(200);
    c.algorithm = Algorithm::decoupled;
    c.n2 = 50;
    const auto r = run_pipeline(c);
    CHECK(r.reports.at(0).n == 50);
}

TEST_CASE("frozen law round trip through CSV") {
    auto c = small(120);
    c.algorithm = Algorithm::decoupled;
    c.law_out = scratch("law.csv").string();
    const auto first = run_pipeline(c);
    auto again = c;
    again.law_out.clear();
    again.law_in = c.law_out;
    const auto second = run_pipeline(again);
    CHECK(second.reports.at(0).estimate == first.reports.at(0).estimate);
    CHECK(second.decoupled_bvp->control.hdot == first.decoupled_bvp->control.hdot);
}

TEST_CASE("run_experiment writes byte-identical reports") {
    auto c = small(150);
    c.out = scratch("a.csv").string();
    std::ostringstream log;
    REQUIRE(run_experiment(c, log) == kExitOk);
    const auto first = slurp(c.out);
    CHECK(log.str().find("[model]") != std::string::npos);  // resolved config is echoed
    c.out = scratch("b.csv").string();
    c.threads = 3;
    REQUIRE(run_experiment(c, log) == kExitOk);
    CHECK(slurp(c.out) == first);
    CHECK(first.rfind("algorithm,N,estimate,std_error,ess,wall_time_s,seed\nmc,150,", 0) == 0);

    const auto json = nlohmann::json::parse(slurp(scratch("b.json")));
    CHECK(json.at("reports").size() == 3);
    CHECK(json.at("decoupled").contains("solve_time_s"));
    CHECK(json.at("decoupled").at("bvp").at("control").size() == 50);
}

TEST_CASE("exit codes") {
    std::ostringstream log;
    auto bad = small();
    bad.n = 0;
    bad.out = scratch("bad.csv").string();
    CHECK(run_experiment(bad, log) == kExitConfig);

    auto vanish = small(30);
    vanish.algorithm = Algorithm::decoupled;
    vanish.payoff = "tanh";
    vanish.payoff_params = {{"a", 400.0}, {"b", 5.0}};
    vanish.out = scratch("vanish.csv").string();
    CHECK(run_experiment(vanish, log) == kExitSolver);

    auto wild = small(30);
    wild.algorithm = Algorithm::mc;
    wild.model = "linear-ou";
    wild.model_params = {{"sigma", 1.7e308}};
    wild.out = scratch("wild.csv").string();
    CHECK(run_experiment(wild, log) == kExitSimulation);
}

TEST_CASE("check_optimality writes a gap report") {
    auto c = small(300);
    c.out = scratch("gap.json").string();
    std::ostringstream log;
    REQUIRE(check_optimality(c, log) == kExitOk);
    const auto json = nlohmann::json::parse(slurp(c.out));
    CHECK(json.at("decoupled").at("optimality").at("certified") == true);
    CHECK(log.str().find("certified") != std::string::npos);
}

TEST_CASE("table sweeps") {
    auto c = small();
    std::ostringstream csv, log;
    TableSweep sweep;
    sweep.counts = {100, 200};
    REQUIRE(reproduce_tables(TableKind::table1, c, csv, log, sweep) == kExitOk);
    std::istringstream lines(csv.str());
    std::string header, row1, row2;
    std::getline(lines, header);
    std::getline(lines, row1);
    std::getline(lines, row2);
    CHECK(header ==
          "N,mc_payoff,mc_error,mc_time,decoupled_payoff,decoupled_error,decoupled_time,decoupled_solve_time,"
          "complete_payoff,complete_error,complete_time,complete_solve_time,seed");
    CHECK(row1.rfind("100,", 0) == 0);
    CHECK(row1.substr(row1.rfind(',') + 1) == std::to_string(c.seed));
    CHECK(row2.substr(row2.rfind(',') + 1) == std::to_string(c.seed + 1));

    // Row 0 of the sweep equals a standalone run at the same seed.
    auto single = c;
    single.n = 100;
    single.algorithm = Algorithm::decoupled;
    const auto r = run_pipeline(single);
    std::istringstream fields(row1);
    std::string field;
    for (int i = 0; i < 5; ++i) std::getline(fields, field, ',');
    CHECK(std::stod(field) == r.reports[0].estimate);

    std::ostringstream csv2;
    REQUIRE(reproduce_tables(TableKind::table2, c, csv2, log, sweep) == kExitOk);
    CHECK(csv2.str().rfind("N,mc_payoff,mc_error,decoupled_payoff,decoupled_error,complete_payoff,complete_error,seed\n",
                           0) == 0);

    std::ostringstream chaos;
    sweep.counts = {50};
    sweep.repetitions = 4;
    REQUIRE(reproduce_tables(TableKind::chaos, c, chaos, log, sweep) == kExitOk);
    CHECK(chaos.str().rfind("N,M,mean_estimate,mean_std_error,cross_rep_std,wall_time_s,seed\n50,4,", 0) == 0);

    CHECK_THROWS_AS(parse_table("table3"), ConfigError);
    CHECK(table_particle_counts() == std::vector<std::size_t>{1000, 5000, 10000, 50000, 100000});
}
