#include "axle/peaks.hpp"

#include "axle/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace axle {

void PeakParams::validate() const {
    if (!(min_height > 0.0 && min_height <= 1.0)) throw Error(ErrorKind::Config, "min_height must be in (0, 1]");
    if (min_distance < 1) throw Error(ErrorKind::Config, "min_distance must be >= 1");
    if (!(min_prominence >= 0.0)) throw Error(ErrorKind::Config, "min_prominence must be >= 0");
}

std::vector<std::int64_t> local_maxima(std::span<const double> x) {
    std::vector<std::int64_t> peaks;
    const auto n = static_cast<std::int64_t>(x.size());
    std::int64_t i = 1;
    const std::int64_t last = n - 1;
    while (i < last) {
        if (x[i - 1] < x[i]) {
            std::int64_t ahead = i + 1;
            while (ahead < last && x[ahead] == x[i]) ++ahead;
            if (x[ahead] < x[i]) {
                const std::int64_t right_edge = ahead - 1;
                peaks.push_back((i + right_edge) / 2);
                i = ahead;
                continue;
            }
        }
        ++i;
    }
    return peaks;
}

std::vector<double> peak_prominences(std::span<const double> x, std::span<const std::int64_t> peaks) {
    std::vector<double> prominences;
    prominences.reserve(peaks.size());
    const auto n = static_cast<std::int64_t>(x.size());
    for (const auto peak : peaks) {
        const double height = x[peak];

        double left_min = height;
        for (std::int64_t i = peak; i >= 0 && x[i] <= height; --i) left_min = std::min(left_min, x[i]);

        double right_min = height;
        for (std::int64_t i = peak; i < n && x[i] <= height; ++i) right_min = std::min(right_min, x[i]);

        prominences.push_back(height - std::max(left_min, right_min));
    }
    return prominences;
}

std::vector<std::int64_t> select_by_distance(std::span<const double> x, std::span<const std::int64_t> peaks,
                                             std::int64_t min_distance) {
    const auto count = peaks.size();
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[peaks[a]] > x[peaks[b]]; });

    std::vector<bool> keep(count, true);
    for (const auto j : order) {
        if (!keep[j]) continue;
        for (std::size_t k = j; k-- > 0 && peaks[j] - peaks[k] < min_distance;) keep[k] = false;
        for (std::size_t k = j + 1; k < count && peaks[k] - peaks[j] < min_distance; ++k) keep[k] = false;
    }

    std::vector<std::int64_t> kept;
    for (std::size_t i = 0; i < count; ++i) {
        if (keep[i]) kept.push_back(peaks[i]);
    }
    return kept;
}

std::vector<std::int64_t> find_peaks(std::span<const double> trace, const PeakParams& params) {
    params.validate();
    for (double v : trace) {
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "trace contains non-finite values");
    }

    std::vector<std::int64_t> candidates;
    for (const auto p : local_maxima(trace)) {
        if (trace[p] >= params.min_height) candidates.push_back(p);
    }

    const auto prominences = peak_prominences(trace, candidates);
    std::vector<std::int64_t> prominent;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (prominences[i] >= params.min_prominence) prominent.push_back(candidates[i]);
    }

    return select_by_distance(trace, prominent, params.min_distance);
}

}  // namespace axle
