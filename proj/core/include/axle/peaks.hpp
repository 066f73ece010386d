#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace axle {

/// Gates for prominence-based peak extraction.
struct PeakParams {
    double min_height = 0.25;
    std::int64_t min_distance = 20;   // samples
    double min_prominence = 0.15;

    void validate() const;
};

/// Local maxima of `x`. Flat tops count once, at their midpoint (rounded
/// down); the first and last sample are never peaks.
std::vector<std::int64_t> local_maxima(std::span<const double> x);

/// Topographic prominence of each peak: its height minus the higher of the
/// lowest points on either side before reaching higher terrain or the edge.
std::vector<double> peak_prominences(std::span<const double> x, std::span<const std::int64_t> peaks);

/// Keeps peaks in descending height order (ties: lower index) and drops any
/// peak closer than `min_distance` to an already kept one. Input must be
/// ascending; output is ascending.
std::vector<std::int64_t> select_by_distance(std::span<const double> x, std::span<const std::int64_t> peaks,
                                             std::int64_t min_distance);

/// Height gate, then prominence gate, then distance suppression.
std::vector<std::int64_t> find_peaks(std::span<const double> trace, const PeakParams& params);

}  // namespace axle
