#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace mvis {

/// Uniform time grid on [0, T] with `n_steps` cells.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n_steps);

    double horizon() const noexcept { return horizon_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    double dt() const noexcept { return horizon_ / static_cast<double>(n_steps_); }
    double time(std::size_t node) const noexcept {
        return node == n_steps_ ? horizon_ : static_cast<double>(node) * dt();
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double horizon_;
    std::size_t n_steps_;
};

/// Derivative of the Cameron-Martin shift h, constant on each grid cell.
struct ControlPath {
    std::vector<double> hdot;

    static ControlPath zero(const TimeGrid& grid) { return {std::vector<double>(grid.n_steps(), 0.0)}; }
    static ControlPath constant(const TimeGrid& grid, double value) {
        return {std::vector<double>(grid.n_steps(), value)};
    }

    std::size_t size() const noexcept { return hdot.size(); }
    /// sum_k hdot_k^2 dt
    double energy(double dt) const noexcept;
    bool all_finite() const noexcept;
};

enum class MeasureLabel { p, q_decoupled, q_complete };

std::string_view to_string(MeasureLabel label) noexcept;

/// N particle paths on a grid together with their Brownian increments and
/// terminal likelihood weights dP/dQ. Storage is particle-major.
class ParticleEnsemble {
public:
    ParticleEnsemble(TimeGrid grid, std::size_t n_particles, std::uint64_t seed, MeasureLabel label);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return n_; }
    std::uint64_t seed() const noexcept { return seed_; }
    MeasureLabel label() const noexcept { return label_; }

    double state(std::size_t i, std::size_t k) const noexcept { return states_[i * (steps() + 1) + k]; }
    double& state(std::size_t i, std::size_t k) noexcept { return states_[i * (steps() + 1) + k]; }
    double increment(std::size_t i, std::size_t k) const noexcept { return increments_[i * steps() + k]; }
    double& increment(std::size_t i, std::size_t k) noexcept { return increments_[i * steps() + k]; }
    double terminal(std::size_t i) const noexcept { return state(i, steps()); }

    std::span<const double> path(std::size_t i) const noexcept {
        return {states_.data() + i * (steps() + 1), steps() + 1};
    }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const double> log_weights() const noexcept { return log_weights_; }
    std::span<double> weights() noexcept { return weights_; }
    std::span<double> log_weights() noexcept { return log_weights_; }

private:
    std::size_t steps() const noexcept { return grid_.n_steps(); }

    TimeGrid grid_;
    std::size_t n_;
    std::uint64_t seed_;
    MeasureLabel label_;
    std::vector<double> states_;
    std::vector<double> increments_;
    std::vector<double> weights_;
    std::vector<double> log_weights_;
};

}  // namespace mvis
