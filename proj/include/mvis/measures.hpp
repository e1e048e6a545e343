#pragma once

#include "mvis/ensemble.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace mvis {

/// How a weighted cloud turns into a measure:
///  - probability:  sum_j w_j f(y_j) / sum_j w_j
///  - raw_average:  sum_j w_j f(y_j) / N   (likelihood-weighted empirical law)
enum class Normalization { probability, raw_average };

class WeightedCloud {
public:
    WeightedCloud(std::vector<double> points, std::vector<double> weights,
                  Normalization normalization = Normalization::probability);

    /// Unit weights, probability normalization.
    static WeightedCloud uniform(std::vector<double> points);

    std::span<const double> points() const noexcept { return points_; }
    std::span<const double> weights() const noexcept { return weights_; }
    Normalization normalization() const noexcept { return normalization_; }
    std::size_t size() const noexcept { return points_.size(); }

    /// Denominator applied to sum_j w_j f(y_j).
    double normalizer() const noexcept;

    friend bool operator==(const WeightedCloud&, const WeightedCloud&) = default;

private:
    std::vector<double> points_;
    std::vector<double> weights_;
    Normalization normalization_;
};

/// Frozen empirical law on a grid: one uniform cloud per node, held constant
/// on [t_k, t_{k+1}).
class MeasurePath {
public:
    MeasurePath(TimeGrid grid, std::vector<WeightedCloud> clouds);

    const TimeGrid& grid() const noexcept { return grid_; }
    const WeightedCloud& at_node(std::size_t k) const { return clouds_.at(k); }
    /// Left-endpoint lookup.
    const WeightedCloud& at_time(double t) const;
    std::size_t particle_count() const noexcept { return clouds_.front().size(); }
    std::size_t node_count() const noexcept { return clouds_.size(); }

    friend bool operator==(const MeasurePath&, const MeasurePath&) = default;

private:
    TimeGrid grid_;
    std::vector<WeightedCloud> clouds_;
};

/// Quadratic Wasserstein distance between two 1-d probability clouds,
/// computed as the L2 distance between their quantile functions.
double wasserstein2_1d(const WeightedCloud& mu, const WeightedCloud& nu);

MeasurePath freeze_measure_path(const ParticleEnsemble& ensemble);

/// Re-samples a frozen law onto another grid over the same horizon using the
/// left-endpoint rule.
MeasurePath resample_measure_path(const MeasurePath& path, const TimeGrid& grid);

/// CSV with header `step,particle,state`.
void write_measure_path_csv(std::ostream& out, const MeasurePath& path);
MeasurePath read_measure_path_csv(std::istream& in, const TimeGrid& grid);

}  // namespace mvis
