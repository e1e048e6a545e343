#include "mvis/ensemble.hpp"

#include "mvis/errors.hpp"

#include <cmath>

namespace mvis {

TimeGrid::TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_steps_(n_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("time horizon must be positive");
    if (n_steps == 0) throw ConfigError("n_steps must be at least 1");
}

double ControlPath::energy(double dt) const noexcept {
    double acc = 0.0;
    for (double v : hdot) acc += v * v;
    return acc * dt;
}

bool ControlPath::all_finite() const noexcept {
    for (double v : hdot)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string_view to_string(MeasureLabel label) noexcept {
    switch (label) {
        case MeasureLabel::p: return "mc";
        case MeasureLabel::q_decoupled: return "decoupled";
        case MeasureLabel::q_complete: return "complete";
    }
    return "unknown";
}

ParticleEnsemble::ParticleEnsemble(TimeGrid grid, std::size_t n_particles, std::uint64_t seed, MeasureLabel label)
    : grid_(grid),
      n_(n_particles),
      seed_(seed),
      label_(label),
      states_(n_particles * (grid.n_steps() + 1), 0.0),
      increments_(n_particles * grid.n_steps(), 0.0),
      weights_(n_particles, 1.0),
      log_weights_(n_particles, 0.0) {
    if (n_particles == 0) throw ConfigError("particle count must be at least 1");
}

}  // namespace mvis
