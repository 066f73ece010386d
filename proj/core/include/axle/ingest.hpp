#pragma once

#include "axle/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace axle::ingest {

/// Peak picking on a wheel-load channel; same algorithm as
/// postprocess::find_peaks with the height gate relative to the signal max
/// and no prominence gate.
struct WheelLoadPeakParams {
    double min_height_fraction = 0.25;
    std::int64_t min_distance = 20;
};

std::vector<std::int64_t> detect_wheel_load_peaks(std::span<const double> signal,
                                                  const WheelLoadPeakParams& params = {});

enum class Verdict { Accepted, Rejected };

/// A passage is usable only if both measuring points saw the same, non-zero
/// number of axles.
Verdict validate_passage(std::span<const std::int64_t> peaks_g1, std::span<const std::int64_t> peaks_g2);

/// Mean velocity of each axle between the two measuring points, pairing
/// peaks by rank.
std::vector<double> compute_axle_velocities(std::span<const std::int64_t> peaks_g1,
                                            std::span<const std::int64_t> peaks_g2, double wlm_spacing,
                                            double sample_rate);

/// Sample index at which each axle is at each sensor's x-ordinate.
/// `n_samples` bounds the result; pass a negative value to skip the check.
IndexMatrix compute_crossing_indices(std::span<const std::int64_t> peaks_g1, std::span<const double> velocities,
                                     std::span<const double> sensor_offsets, double sample_rate,
                                     std::int64_t n_samples = -1);

struct UncertaintyBudget {
    double sample_rate = 600.0;
    double wlm_spacing = 14.40;
    double wlm_spacing_uncertainty = 0.20;
};

/// Linear error propagation of the timing and spacing uncertainty to an
/// absolute position error (m) at a sensor `offset` metres behind G1.
double label_uncertainty(double velocity, double offset, const UncertaintyBudget& budget = {});

LabelMatrix build_binary_labels(const IndexMatrix& crossing_indices, std::int64_t n_samples);

/// Recovers crossing indices (ascending per column) from a one-hot target
/// matrix. Inverse of build_binary_labels.
IndexMatrix recover_crossing_indices(const LabelMatrix& targets);

struct IngestParams {
    WheelLoadPeakParams peaks;
};

/// Outcome for one passage. `labels` is only meaningful when accepted.
struct IngestResult {
    Verdict verdict = Verdict::Rejected;
    std::string reason;
    LabelSet labels;
};

/// Runs the whole labelling pipeline on one record. Inconsistent passages
/// come back as Rejected with a reason rather than throwing.
IngestResult label_passage(const PassageRecord& passage, const IngestParams& params = {});

struct IngestStats {
    std::int64_t total = 0;
    std::int64_t accepted = 0;
    std::int64_t rejected = 0;

    [[nodiscard]] double accepted_ratio() const {
        return total == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(total);
    }
};

}  // namespace axle::ingest
