#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace axle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using LabelMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// One recorded crossing: accelerometers plus the two rail wheel-load
/// measuring points used for ground truth.
struct PassageRecord {
    std::string id;
    double sample_rate = 600.0;               // Hz
    Matrix accel;                             // n_samples x n_sensors, m/s^2
    Matrix wheel_load;                        // n_samples x 2 (G1, G2)
    std::vector<double> sensor_offsets;       // m, from G1 to each accelerometer
    double wlm_spacing = 14.40;               // m, G1 to G2
    double wlm_spacing_uncertainty = 0.20;    // m

    [[nodiscard]] std::int64_t n_samples() const { return accel.rows(); }
    [[nodiscard]] std::int64_t n_sensors() const { return accel.cols(); }

    /// Throws Error(InvalidInput) if any record invariant is violated.
    void validate() const;
};

struct LabelSet {
    std::vector<double> axle_velocities;   // m/s, one per axle
    IndexMatrix crossing_indices;          // n_axles x n_sensors
    Matrix uncertainty;                    // n_axles x n_sensors, m
    LabelMatrix targets;                   // n_samples x n_sensors, {0,1}

    [[nodiscard]] std::int64_t n_axles() const { return crossing_indices.rows(); }
    [[nodiscard]] std::int64_t n_sensors() const { return crossing_indices.cols(); }

    /// Throws Error(InvalidLabels) if the label invariants do not hold.
    void validate(std::int64_t n_samples) const;
};

}  // namespace axle
