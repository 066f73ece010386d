#include "axle/ingest.hpp"

#include "axle/error.hpp"
#include "axle/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace axle::ingest {

std::vector<std::int64_t> detect_wheel_load_peaks(std::span<const double> signal,
                                                  const WheelLoadPeakParams& params) {
    if (signal.empty()) throw Error(ErrorKind::InvalidInput, "wheel-load signal is empty");
    for (double v : signal) {
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "wheel-load signal contains non-finite values");
    }
    if (params.min_distance < 1) throw Error(ErrorKind::Config, "min_distance must be >= 1");

    const double max_value = *std::ranges::max_element(signal);
    if (!(max_value > 0.0)) return {};
    const double min_height = params.min_height_fraction * max_value;

    std::vector<std::int64_t> candidates;
    for (const auto p : local_maxima(signal)) {
        if (signal[p] >= min_height) candidates.push_back(p);
    }
    return select_by_distance(signal, candidates, params.min_distance);
}

Verdict validate_passage(std::span<const std::int64_t> peaks_g1, std::span<const std::int64_t> peaks_g2) {
    return (!peaks_g1.empty() && peaks_g1.size() == peaks_g2.size()) ? Verdict::Accepted : Verdict::Rejected;
}

std::vector<double> compute_axle_velocities(std::span<const std::int64_t> peaks_g1,
                                            std::span<const std::int64_t> peaks_g2, double wlm_spacing,
                                            double sample_rate) {
    if (peaks_g1.size() != peaks_g2.size())
        throw Error(ErrorKind::InvalidPassage, "measuring points report different axle counts");
    std::vector<double> velocities;
    velocities.reserve(peaks_g1.size());
    for (std::size_t i = 0; i < peaks_g1.size(); ++i) {
        const auto delta = peaks_g2[i] - peaks_g1[i];
        if (delta <= 0)
            throw Error(ErrorKind::InvalidPassage, "axle " + std::to_string(i) +
                                                       " reaches G2 no later than G1 (wrong direction or mismatched peaks)");
        velocities.push_back(wlm_spacing * sample_rate / static_cast<double>(delta));
    }
    return velocities;
}

IndexMatrix compute_crossing_indices(std::span<const std::int64_t> peaks_g1, std::span<const double> velocities,
                                     std::span<const double> sensor_offsets, double sample_rate,
                                     std::int64_t n_samples) {
    if (peaks_g1.size() != velocities.size())
        throw Error(ErrorKind::InvalidInput, "one velocity per G1 peak required");
    const auto n_axles = static_cast<Eigen::Index>(peaks_g1.size());
    const auto n_sensors = static_cast<Eigen::Index>(sensor_offsets.size());
    IndexMatrix indices(n_axles, n_sensors);
    for (Eigen::Index a = 0; a < n_axles; ++a) {
        if (!(velocities[a] > 0.0)) throw Error(ErrorKind::InvalidInput, "velocities must be > 0");
        for (Eigen::Index s = 0; s < n_sensors; ++s) {
            // std::llround rounds halfway cases away from zero.
            const auto shift = std::llround(sensor_offsets[s] * sample_rate / velocities[a]);
            const auto idx = peaks_g1[a] + static_cast<std::int64_t>(shift);
            if (n_samples >= 0 && (idx < 0 || idx >= n_samples))
                throw Error(ErrorKind::OutOfRange, "crossing index " + std::to_string(idx) + " for axle " +
                                                       std::to_string(a) + " at sensor " + std::to_string(s) +
                                                       " lies outside the recording of " +
                                                       std::to_string(n_samples) + " samples");
            indices(a, s) = idx;
        }
    }
    return indices;
}

double label_uncertainty(double velocity, double offset, const UncertaintyBudget& budget) {
    if (!(velocity >= 0.0) || !(offset >= 0.0))
        throw Error(ErrorKind::InvalidInput, "velocity and offset must be >= 0");
    const double dt = 1.0 / budget.sample_rate;
    const double s = budget.wlm_spacing;
    return velocity * dt + offset * (std::abs(velocity / s) * dt + std::abs(1.0 / s) * budget.wlm_spacing_uncertainty);
}

LabelMatrix build_binary_labels(const IndexMatrix& crossing_indices, std::int64_t n_samples) {
    LabelMatrix targets = LabelMatrix::Zero(n_samples, crossing_indices.cols());
    for (Eigen::Index s = 0; s < crossing_indices.cols(); ++s) {
        for (Eigen::Index a = 0; a < crossing_indices.rows(); ++a) {
            const auto idx = crossing_indices(a, s);
            if (idx < 0 || idx >= n_samples)
                throw Error(ErrorKind::InvalidLabels, "crossing index " + std::to_string(idx) + " outside recording");
            if (targets(idx, s) != 0)
                throw Error(ErrorKind::InvalidLabels,
                            "duplicate crossing index " + std::to_string(idx) + " in sensor " + std::to_string(s));
            targets(idx, s) = 1;
        }
    }
    return targets;
}

IndexMatrix recover_crossing_indices(const LabelMatrix& targets) {
    Eigen::Index n_axles = -1;
    std::vector<std::vector<std::int64_t>> columns(static_cast<std::size_t>(targets.cols()));
    for (Eigen::Index s = 0; s < targets.cols(); ++s) {
        for (Eigen::Index t = 0; t < targets.rows(); ++t) {
            if (targets(t, s) != 0) columns[s].push_back(t);
        }
        const auto count = static_cast<Eigen::Index>(columns[s].size());
        if (n_axles >= 0 && count != n_axles)
            throw Error(ErrorKind::InvalidLabels, "sensors disagree on the number of axles");
        n_axles = count;
    }
    IndexMatrix indices(std::max<Eigen::Index>(n_axles, 0), targets.cols());
    for (Eigen::Index s = 0; s < targets.cols(); ++s) {
        for (Eigen::Index a = 0; a < indices.rows(); ++a) indices(a, s) = columns[s][a];
    }
    return indices;
}

IngestResult label_passage(const PassageRecord& passage, const IngestParams& params) {
    passage.validate();
    IngestResult result;

    const auto g1 = detect_wheel_load_peaks(
        std::span<const double>(passage.wheel_load.col(0).data(), passage.n_samples()), params.peaks);
    const auto g2 = detect_wheel_load_peaks(
        std::span<const double>(passage.wheel_load.col(1).data(), passage.n_samples()), params.peaks);

    if (validate_passage(g1, g2) == Verdict::Rejected) {
        result.reason = "peak count mismatch (G1 " + std::to_string(g1.size()) + ", G2 " +
                        std::to_string(g2.size()) + ")";
        return result;
    }

    try {
        LabelSet& labels = result.labels;
        labels.axle_velocities = compute_axle_velocities(g1, g2, passage.wlm_spacing, passage.sample_rate);
        labels.crossing_indices = compute_crossing_indices(g1, labels.axle_velocities, passage.sensor_offsets,
                                                           passage.sample_rate, passage.n_samples());
        const UncertaintyBudget budget{passage.sample_rate, passage.wlm_spacing, passage.wlm_spacing_uncertainty};
        labels.uncertainty.resize(labels.crossing_indices.rows(), labels.crossing_indices.cols());
        for (Eigen::Index a = 0; a < labels.crossing_indices.rows(); ++a) {
            for (Eigen::Index s = 0; s < labels.crossing_indices.cols(); ++s) {
                labels.uncertainty(a, s) =
                    label_uncertainty(labels.axle_velocities[a], passage.sensor_offsets[s], budget);
            }
        }
        labels.targets = build_binary_labels(labels.crossing_indices, passage.n_samples());
        labels.validate(passage.n_samples());
    } catch (const Error& e) {
        result.labels = {};
        result.reason = e.what();
        return result;
    }

    result.verdict = Verdict::Accepted;
    return result;
}

}  // namespace axle::ingest
