#include "mvis/measures.hpp"

#include "mvis/errors.hpp"
#include "mvis/format.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

namespace mvis {

WeightedCloud::WeightedCloud(std::vector<double> points, std::vector<double> weights, Normalization normalization)
    : points_(std::move(points)), weights_(std::move(weights)), normalization_(normalization) {
    if (points_.empty()) throw DomainError("empty cloud");
    if (points_.size() != weights_.size()) throw DomainError("cloud points and weights differ in length");
    bool any_positive = false;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("cloud weights must be finite and nonnegative");
        any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) throw DomainError("cloud has no positive weight");
}

WeightedCloud WeightedCloud::uniform(std::vector<double> points) {
    std::vector<double> weights(points.size(), 1.0);
    return WeightedCloud(std::move(points), std::move(weights), Normalization::probability);
}

double WeightedCloud::normalizer() const noexcept {
    if (normalization_ == Normalization::raw_average) return static_cast<double>(points_.size());
    return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

MeasurePath::MeasurePath(TimeGrid grid, std::vector<WeightedCloud> clouds) : grid_(grid), clouds_(std::move(clouds)) {
    if (clouds_.size() != grid_.n_steps() + 1)
        throw ConfigError("measure path needs one cloud per grid node");
    const std::size_t n = clouds_.front().size();
    for (const auto& cloud : clouds_)
        if (cloud.size() != n) throw ConfigError("measure path particle count varies across nodes");
}

const WeightedCloud& MeasurePath::at_time(double t) const {
    const double scaled = t / grid_.dt();
    auto node = static_cast<long long>(std::floor(scaled + 1e-9));
    node = std::clamp<long long>(node, 0, static_cast<long long>(grid_.n_steps()));
    return clouds_[static_cast<std::size_t>(node)];
}

namespace {

struct Atom {
    double x;
    double mass;
};

std::vector<Atom> sorted_atoms(const WeightedCloud& cloud) {
    if (cloud.normalization() != Normalization::probability)
        throw DomainError("wasserstein2_1d expects probability-normalized clouds");
    const double total = cloud.normalizer();
    std::vector<Atom> atoms;
    atoms.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud.weights()[i] > 0.0) atoms.push_back({cloud.points()[i], cloud.weights()[i] / total});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
    return atoms;
}

}  // namespace

double wasserstein2_1d(const WeightedCloud& mu, const WeightedCloud& nu) {
    const auto a = sorted_atoms(mu);
    const auto b = sorted_atoms(nu);
    // Walk both quantile functions over [0, 1], one breakpoint at a time.
    std::size_t i = 0;
    std::size_t j = 0;
    double left_a = a[0].mass;
    double left_b = b[0].mass;
    double acc = 0.0;
    while (i < a.size() && j < b.size()) {
        const double mass = std::min(left_a, left_b);
        const double d = a[i].x - b[j].x;
        acc += mass * d * d;
        left_a -= mass;
        left_b -= mass;
        if (left_a <= left_b) {
            if (++i < a.size()) left_a += a[i].mass;
        } else {
            if (++j < b.size()) left_b += b[j].mass;
        }
    }
    return std::sqrt(std::max(acc, 0.0));
}

MeasurePath freeze_measure_path(const ParticleEnsemble& ensemble) {
    const auto& grid = ensemble.grid();
    std::vector<WeightedCloud> clouds;
    clouds.reserve(grid.n_steps() + 1);
    std::vector<double> points(ensemble.size());
    for (std::size_t k = 0; k <= grid.n_steps(); ++k) {
        for (std::size_t i = 0; i < ensemble.size(); ++i) points[i] = ensemble.state(i, k);
        clouds.push_back(WeightedCloud::uniform(points));
    }
    return MeasurePath(grid, std::move(clouds));
}

MeasurePath resample_measure_path(const MeasurePath& path, const TimeGrid& grid) {
    if (std::abs(path.grid().horizon() - grid.horizon()) > 1e-12 * grid.horizon())
        throw ConfigError("cannot resample a measure path onto a different horizon");
    std::vector<WeightedCloud> clouds;
    clouds.reserve(grid.n_steps() + 1);
    for (std::size_t k = 0; k <= grid.n_steps(); ++k) clouds.push_back(path.at_time(grid.time(k)));
    return MeasurePath(grid, std::move(clouds));
}

void write_measure_path_csv(std::ostream& out, const MeasurePath& path) {
    out << "step,particle,state\n";
    for (std::size_t k = 0; k < path.node_count(); ++k) {
        const auto points = path.at_node(k).points();
        for (std::size_t i = 0; i < points.size(); ++i)
            out << k << ',' << i << ',' << format_real(points[i]) << '\n';
    }
}

MeasurePath read_measure_path_csv(std::istream& in, const TimeGrid& grid) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("step,particle,state", 0) != 0)
        throw ConfigError("measure path CSV must start with header step,particle,state");
    std::vector<std::vector<std::pair<std::size_t, double>>> nodes(grid.n_steps() + 1);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string step_s, particle_s, state_s;
        if (!std::getline(row, step_s, ',') || !std::getline(row, particle_s, ',') || !std::getline(row, state_s))
            throw ConfigError("malformed measure path CSV at line " + std::to_string(line_no));
        try {
            const std::size_t step = std::stoul(step_s);
            if (step >= nodes.size())
                throw ConfigError("measure path CSV step " + step_s + " outside the grid");
            nodes[step].emplace_back(std::stoul(particle_s), std::stod(state_s));
        } catch (const std::logic_error&) {
            throw ConfigError("malformed measure path CSV at line " + std::to_string(line_no));
        }
    }
    std::vector<WeightedCloud> clouds;
    clouds.reserve(nodes.size());
    for (auto& node : nodes) {
        if (node.empty()) throw ConfigError("measure path CSV does not cover every grid node");
        std::sort(node.begin(), node.end());
        std::vector<double> points;
        points.reserve(node.size());
        for (const auto& entry : node) points.push_back(entry.second);
        clouds.push_back(WeightedCloud::uniform(std::move(points)));
    }
    return MeasurePath(grid, std::move(clouds));
}

}  // namespace mvis
