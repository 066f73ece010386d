#include "axle/types.hpp"

#include "axle/error.hpp"

#include <cmath>
#include <string>

namespace axle {

void PassageRecord::validate() const {
    if (accel.rows() <= 0) throw Error(ErrorKind::InvalidInput, "passage '" + id + "' has no samples");
    if (accel.cols() < 1) throw Error(ErrorKind::InvalidInput, "passage '" + id + "' has no sensors");
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
        throw Error(ErrorKind::InvalidInput, "passage '" + id + "' sample_rate must be > 0");
    if (wheel_load.rows() != accel.rows() || wheel_load.cols() != 2)
        throw Error(ErrorKind::InvalidInput, "passage '" + id + "' wheel_load must be n_samples x 2");
    if (static_cast<std::int64_t>(sensor_offsets.size()) != accel.cols())
        throw Error(ErrorKind::InvalidInput, "passage '" + id + "' needs one sensor offset per sensor");
    for (double offset : sensor_offsets) {
        if (!std::isfinite(offset) || offset < 0.0)
            throw Error(ErrorKind::InvalidInput, "passage '" + id + "' sensor offsets must be finite and >= 0");
    }
    if (!(wlm_spacing > 0.0) || !std::isfinite(wlm_spacing))
        throw Error(ErrorKind::InvalidInput, "passage '" + id + "' wlm_spacing must be > 0");
    if (!(wlm_spacing_uncertainty >= 0.0))
        throw Error(ErrorKind::InvalidInput, "passage '" + id + "' wlm_spacing_uncertainty must be >= 0");
}

void LabelSet::validate(std::int64_t n_samples) const {
    const auto n_axles = crossing_indices.rows();
    if (static_cast<std::int64_t>(axle_velocities.size()) != n_axles)
        throw Error(ErrorKind::InvalidLabels, "one velocity per axle required");
    for (double v : axle_velocities) {
        if (!(v > 0.0)) throw Error(ErrorKind::InvalidLabels, "axle velocities must be > 0");
    }
    for (Eigen::Index s = 0; s < crossing_indices.cols(); ++s) {
        for (Eigen::Index a = 0; a < n_axles; ++a) {
            const auto idx = crossing_indices(a, s);
            if (idx < 0 || idx >= n_samples)
                throw Error(ErrorKind::InvalidLabels, "crossing index outside recording at axle " +
                                                          std::to_string(a) + ", sensor " + std::to_string(s));
            if (a > 0 && idx <= crossing_indices(a - 1, s))
                throw Error(ErrorKind::InvalidLabels,
                            "crossing indices not strictly increasing in sensor " + std::to_string(s));
        }
    }
    if (targets.size() != 0) {
        if (targets.rows() != n_samples || targets.cols() != crossing_indices.cols())
            throw Error(ErrorKind::InvalidLabels, "targets must be n_samples x n_sensors");
        for (Eigen::Index s = 0; s < targets.cols(); ++s) {
            std::int64_t ones = 0;
            for (Eigen::Index t = 0; t < targets.rows(); ++t) ones += targets(t, s);
            if (ones != n_axles) throw Error(ErrorKind::InvalidLabels, "targets do not match crossing indices");
            for (Eigen::Index a = 0; a < n_axles; ++a) {
                if (targets(crossing_indices(a, s), s) != 1)
                    throw Error(ErrorKind::InvalidLabels, "targets do not match crossing indices");
            }
        }
    }
}

}  // namespace axle
