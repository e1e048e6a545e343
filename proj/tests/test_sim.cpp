#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mvis/errors.hpp"
#include "mvis/rng.hpp"
#include "mvis/sim.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace mvis;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(v.size() - 1);
    return m;
}

std::vector<double> terminal_states(const ParticleEnsemble& e) {
    std::vector<double> out(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) out[i] = e.terminal(i);
    return out;
}

bool same_paths(const ParticleEnsemble& a, const ParticleEnsemble& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k <= a.grid().n_steps(); ++k)
            if (a.state(i, k) != b.state(i, k)) return false;
    return true;
}

ControlPath random_control(std::mt19937_64& rng, const TimeGrid& grid) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ControlPath h = ControlPath::zero(grid);
    for (auto& x : h.hdot) x = u(rng);
    return h;
}

}  // namespace

TEST_CASE("philox4x32-10 known-answer vectors") {
    using P = Philox4x32;
    CHECK(P::generate({0, 0, 0, 0}, {0, 0}) == P::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(P::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          P::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(P::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          P::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal streams look standard normal") {
    std::vector<double> v;
    for (std::uint64_t i = 0; i < 200000; ++i) v.push_back(stream_normal(42, i % 1000, i / 1000));
    const auto m = moments(v);
    CHECK(std::abs(m.mean) < 3.0 / std::sqrt(2e5));
    CHECK(std::abs(m.var - 1.0) < 3.0 * std::sqrt(2.0 / 2e5));
    CHECK(stream_normal(1, 2, 3) == stream_normal(1, 2, 3));
    CHECK(stream_normal(1, 2, 3) != stream_normal(2, 2, 3));
    CHECK(stream_normal(1, 2, 3) != stream_normal(1, 3, 2));
}

TEST_CASE("time grid") {
    const TimeGrid grid(1.0, 50);
    CHECK(grid.dt() == doctest::Approx(0.02));
    CHECK(grid.time(50) == 1.0);
    CHECK(grid.time(10) == doctest::Approx(0.2));
    CHECK_THROWS_AS(TimeGrid(0.0, 5), ConfigError);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), ConfigError);
}

TEST_CASE("P simulation: invariants and Euler step") {
    const TimeGrid grid(1.0, 20);
    const auto model = kuramoto_model(1.0, 0.3);
    const auto e = simulate_particles_p(model, 50, grid, 0.25, 9);
    CHECK(e.label() == MeasureLabel::p);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(e.state(i, 0) == 0.25);
        CHECK(e.weights()[i] == 1.0);
    }
    // Recompute step 7 of particle 3 by hand from the stored increments.
    std::vector<double> cloud;
    for (std::size_t j = 0; j < 50; ++j) cloud.push_back(e.state(j, 7));
    const double x = e.state(3, 7);
    const double expected = x + drift_direct(model, grid.time(7), x, WeightedCloud::uniform(cloud)) * grid.dt() +
                            0.3 * e.increment(3, 7);
    CHECK(e.state(3, 8) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(e.increment(3, 7) == brownian_increment(9, 3, 7, std::sqrt(grid.dt())));
}

TEST_CASE("linear mean-field: particle mean moves only with the averaged noise") {
    const TimeGrid grid(1.0, 50);
    const auto e = simulate_particles_p(linear_mean_field_model(0.3), 400, grid, 1.5, 5);
    for (std::size_t k = 0; k <= 50; k += 10) {
        double mean = 0.0;
        double noise = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) {
            mean += e.state(i, k);
            for (std::size_t s = 0; s < k; ++s) noise += e.increment(i, s);
        }
        mean /= 400.0;
        noise /= 400.0;
        CHECK(mean - 0.3 * noise == doctest::Approx(1.5).epsilon(1e-12));
        // and the mean stays at x0 up to Monte-Carlo error
        CHECK(std::abs(mean - 1.5) < 3.0 * 0.3 * std::sqrt(grid.time(k) / 400.0) + 1e-12);
    }
}

TEST_CASE("linear OU terminal variance") {
    const double sigma = 0.3;
    const TimeGrid grid(1.0, 50);
    const std::size_t n = 100000;
    const auto m = moments(terminal_states(simulate_particles_p(linear_ou_model(sigma), n, grid, 0.0, 123)));
    const double se = m.var * std::sqrt(2.0 / static_cast<double>(n - 1));

    // Closed form of the Euler recursion X_{k+1} = (1 - dt) X_k + sigma dW.
    const double r = (1.0 - grid.dt()) * (1.0 - grid.dt());
    const double discrete = sigma * sigma * grid.dt() * (1.0 - std::pow(r, 50)) / (1.0 - r);
    CHECK(std::abs(m.var - discrete) <= 3.0 * se);

    const double continuous = sigma * sigma * (1.0 - std::exp(-2.0)) / 2.0;
    CHECK(std::abs(m.var - continuous) <= 3.0 * se);
    CHECK(std::abs(m.mean) <= 3.0 * std::sqrt(m.var / static_cast<double>(n)));
}

TEST_CASE("results do not depend on the thread count") {
    const TimeGrid grid(1.0, 25);
    const auto model = kuramoto_model(1.0, 0.3);
    const auto h = ControlPath::constant(grid, 1.2);
    const auto p1 = simulate_particles_p(model, 301, grid, 0.0, 4, {1});
    const auto p4 = simulate_particles_p(model, 301, grid, 0.0, 4, {4});
    CHECK(same_paths(p1, p4));
    const auto law = freeze_measure_path(p1);
    CHECK(same_paths(simulate_decoupled_q(model, law, h, 301, grid, 0.0, 8, {1}),
                     simulate_decoupled_q(model, law, h, 301, grid, 0.0, 8, {3})));
    const auto c1 = simulate_complete_q(model, h, 301, grid, 0.0, 8, {1});
    const auto c4 = simulate_complete_q(model, h, 301, grid, 0.0, 8, {4});
    CHECK(same_paths(c1, c4));
    for (std::size_t i = 0; i < 301; ++i) CHECK(c1.weights()[i] == c4.weights()[i]);
}

TEST_CASE("h = 0 reproduces the P simulation bit for bit") {
    const TimeGrid grid(1.0, 50);
    const auto model = kuramoto_model(1.0, 0.3);
    const auto zero = ControlPath::zero(grid);
    for (std::uint64_t seed : {1ull, 99ull, 20190417ull}) {
        const auto p = simulate_particles_p(model, 200, grid, 0.0, seed);
        const auto complete = simulate_complete_q(model, zero, 200, grid, 0.0, seed);
        CHECK(same_paths(p, complete));
        for (double w : complete.weights()) CHECK(w == 1.0);

        // Frozen-law P-run: the decoupled paths follow the same Euler stencil
        // against the law of the run they were frozen from.
        const auto law = freeze_measure_path(p);
        const auto decoupled = simulate_decoupled_q(model, law, zero, 200, grid, 0.0, seed);
        CHECK(same_paths(p, decoupled));
        for (double w : decoupled.weights()) CHECK(w == 1.0);
    }
}

TEST_CASE("likelihood weights have mean one for random controls") {
    const TimeGrid grid(1.0, 50);
    const auto model = kuramoto_model(1.0, 0.3);
    std::mt19937_64 rng(31);
    const auto law = freeze_measure_path(simulate_particles_p(model, 200, grid, 0.0, 2));
    for (int trial = 0; trial < 20; ++trial) {
        const auto h = random_control(rng, grid);
        for (int which = 0; which < 2; ++which) {
            const auto e = which == 0 ? simulate_decoupled_q(model, law, h, 4000, grid, 0.0, 100 + trial)
                                      : simulate_complete_q(model, h, 4000, grid, 0.0, 100 + trial);
            std::vector<double> w(e.weights().begin(), e.weights().end());
            const auto m = moments(w);
            CHECK(std::abs(m.mean - 1.0) <= 3.0 * std::sqrt(m.var / 4000.0));
        }
    }
}

TEST_CASE("discrete Girsanov identity") {
    const TimeGrid grid(1.0, 50);
    const auto model = kuramoto_model(1.0, 0.3);
    std::mt19937_64 rng(1);
    const auto h = random_control(rng, grid);
    const auto law = freeze_measure_path(simulate_particles_p(model, 50, grid, 0.0, 2));
    for (const auto& e : {simulate_decoupled_q(model, law, h, 100, grid, 0.0, 3),
                          simulate_complete_q(model, h, 100, grid, 0.0, 3)}) {
        for (std::size_t i = 0; i < e.size(); ++i) {
            double lw = 0.0;
            for (std::size_t k = 0; k < 50; ++k) lw += -h.hdot[k] * e.increment(i, k) - 0.5 * h.hdot[k] * h.hdot[k] * grid.dt();
            CHECK(e.log_weights()[i] == doctest::Approx(lw).epsilon(1e-13));
            CHECK(e.weights()[i] == doctest::Approx(std::exp(lw)).epsilon(1e-13));
        }
    }
}

TEST_CASE("decoupled paths are shifted by sigma hdot against the frozen law") {
    const TimeGrid grid(1.0, 10);
    const auto model = kuramoto_model(1.0, 0.3);
    const auto law = freeze_measure_path(simulate_particles_p(model, 30, grid, 0.0, 2));
    const auto h = ControlPath::constant(grid, 0.7);
    const auto e = simulate_decoupled_q(model, law, h, 5, grid, 0.1, 6);
    for (std::size_t k = 0; k < 10; ++k) {
        const double x = e.state(2, k);
        const double expected =
            x + (drift_direct(model, grid.time(k), x, law.at_node(k)) + 0.3 * 0.7) * grid.dt() + 0.3 * e.increment(2, k);
        CHECK(e.state(2, k + 1) == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("complete system interacts through the raw-average weighted law") {
    const TimeGrid grid(1.0, 10);
    const auto model = kuramoto_model(1.0, 0.3);
    const auto h = ControlPath::constant(grid, 1.5);
    const auto e = simulate_complete_q(model, h, 20, grid, 0.0, 6);
    // Rebuild step k from the stored states and increments.
    std::vector<double> log_z(20, 0.0);
    for (std::size_t k = 0; k < 10; ++k) {
        std::vector<double> pts, z;
        for (std::size_t j = 0; j < 20; ++j) {
            pts.push_back(e.state(j, k));
            z.push_back(std::exp(log_z[j]));
        }
        const WeightedCloud cloud(pts, z, Normalization::raw_average);
        for (std::size_t i = 0; i < 20; ++i) {
            const double x = e.state(i, k);
            const double expected =
                x + (drift_direct(model, grid.time(k), x, cloud) + 0.3 * 1.5) * grid.dt() + 0.3 * e.increment(i, k);
            CHECK(e.state(i, k + 1) == doctest::Approx(expected).epsilon(1e-13));
            log_z[i] += -1.5 * e.increment(i, k) - 0.5 * 1.5 * 1.5 * grid.dt();
        }
    }
}

TEST_CASE("simulation errors") {
    const TimeGrid grid(1.0, 50);
    ModelSpec wild = zero_drift_model(0.3);
    wild.name = "wild";
    wild.beta = [](double, double x) { return x * x * x; };
    wild.beta_dx = [](double, double x) { return 3.0 * x * x; };
    try {
        (void)simulate_particles_p(wild, 10, grid, 20.0, 1);
        FAIL("expected an explosion");
    } catch (const SimulationError& e) {
        CHECK(std::string(e.what()).rfind("explosion at step", 0) == 0);
        CHECK(e.step() < 10);
    }
    const auto law = freeze_measure_path(simulate_particles_p(zero_drift_model(0.3), 10, grid, 0.0, 1));
    CHECK_THROWS_AS(simulate_decoupled_q(wild, law, ControlPath::zero(grid), 10, grid, 20.0, 1), SimulationError);
    CHECK_THROWS_AS(simulate_complete_q(wild, ControlPath::zero(grid), 10, grid, 20.0, 1), SimulationError);

    const auto model = kuramoto_model(1.0, 0.3);
    CHECK_THROWS_WITH_AS(simulate_complete_q(model, ControlPath::constant(grid, 400.0), 10, grid, 0.0, 1),
                         doctest::Contains("degenerate likelihood"), SimulationError);
    CHECK_THROWS_AS(simulate_complete_q(model, ControlPath::zero(grid), 1, grid, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(simulate_particles_p(model, 0, grid, 0.0, 1), ConfigError);

    const TimeGrid other(1.0, 25);
    CHECK_THROWS_AS(simulate_decoupled_q(model, law, ControlPath::zero(other), 10, other, 0.0, 1), ConfigError);
    auto bad = ControlPath::zero(grid);
    bad.hdot[3] = std::nan("");
    CHECK_THROWS_AS(simulate_decoupled_q(model, law, bad, 10, grid, 0.0, 1), ConfigError);
}

TEST_CASE("ensemble CSV dump") {
    const TimeGrid grid(1.0, 2);
    const auto e = simulate_particles_p(kuramoto_model(1.0, 0.3), 2, grid, 0.0, 1);
    std::ostringstream out;
    write_ensemble_csv(out, e);
    const auto text = out.str();
    CHECK(text.rfind("step,particle,state,weight\n0,0,0,1\n0,1,0,1\n1,0,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
}
