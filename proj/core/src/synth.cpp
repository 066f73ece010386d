#include "axle/synth.hpp"

#include "axle/error.hpp"
#include "axle/ingest.hpp"
#include "axle/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

namespace axle::synth {

namespace {

/// Closed-form state of q'' + 2 zeta w q' + w^2 q = 0 after time tau.
struct FreeResponse {
    double q;
    double dq;
};

FreeResponse free_response(double q0, double dq0, double omega, double zeta, double tau) {
    const double omega_d = omega * std::sqrt(1.0 - zeta * zeta);
    const double a = q0;
    const double b = (dq0 + zeta * omega * a) / omega_d;
    const double decay = std::exp(-zeta * omega * tau);
    const double c = std::cos(omega_d * tau);
    const double s = std::sin(omega_d * tau);
    return {decay * (a * c + b * s),
            decay * ((-zeta * omega * a + omega_d * b) * c + (-zeta * omega * b - omega_d * a) * s)};
}

/// Modal acceleration of one mode driven by one axle, added into `out`.
/// The axle enters the bridge at t_in and leaves after `crossing` seconds;
/// while on the bridge the modal force is amplitude * sin(big_omega * tau).
void accumulate_mode_response(std::vector<double>& out, double amplitude, double omega, double zeta,
                              double big_omega, double t_in, double crossing, double sample_rate) {
    const double k2 = omega * omega - big_omega * big_omega;
    const double c2 = 2.0 * zeta * omega * big_omega;
    const double denom = k2 * k2 + c2 * c2;
    const double px = amplitude * k2 / denom;   // coefficient of sin in the particular solution
    const double py = -amplitude * c2 / denom;  // coefficient of cos

    auto particular = [&](double tau) {
        const double s = std::sin(big_omega * tau);
        const double c = std::cos(big_omega * tau);
        return FreeResponse{px * s + py * c, big_omega * (px * c - py * s)};
    };

    const auto start = particular(0.0);
    const double hq0 = -start.q;
    const double hdq0 = -start.dq;
    const auto exit_h = free_response(hq0, hdq0, omega, zeta, crossing);
    const auto exit_p = particular(crossing);
    const double exit_q = exit_h.q + exit_p.q;
    const double exit_dq = exit_h.dq + exit_p.dq;

    const auto n = static_cast<std::int64_t>(out.size());
    const auto first = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(t_in * sample_rate)));
    for (std::int64_t i = first; i < n; ++i) {
        const double tau = static_cast<double>(i) / sample_rate - t_in;
        if (tau < 0.0) continue;
        double accel;
        if (tau <= crossing) {
            const auto h = free_response(hq0, hdq0, omega, zeta, tau);
            const auto p = particular(tau);
            const double force = amplitude * std::sin(big_omega * tau);
            accel = force - 2.0 * zeta * omega * (h.dq + p.dq) - omega * omega * (h.q + p.q);
        } else {
            const double after = tau - crossing;
            if (zeta * omega * after > 40.0) break;
            const auto h = free_response(exit_q, exit_dq, omega, zeta, after);
            accel = -2.0 * zeta * omega * h.dq - omega * omega * h.q;
        }
        out[i] += accel;
    }
}

double leading_axle_start(const SyntheticScenario& sc) { return sc.g1_position - sc.velocity * sc.lead_time; }

}  // namespace

void SyntheticScenario::validate() const {
    if (!(span > 0.0)) throw Error(ErrorKind::InvalidInput, "span must be > 0");
    if (n_modes < 1) throw Error(ErrorKind::InvalidInput, "n_modes must be >= 1");
    if (modal_frequencies.empty() || !(modal_frequencies.front() > 0.0))
        throw Error(ErrorKind::InvalidInput, "first modal frequency must be > 0");
    if (modal_damping.empty()) throw Error(ErrorKind::InvalidInput, "modal damping required");
    for (double z : modal_damping) {
        if (!(z >= 0.0 && z < 1.0)) throw Error(ErrorKind::InvalidInput, "modal damping must be in [0, 1)");
    }
    if (!(mass_per_length > 0.0)) throw Error(ErrorKind::InvalidInput, "mass_per_length must be > 0");
    if (axle_positions.size() != axle_loads.size())
        throw Error(ErrorKind::InvalidInput, "one load per axle position required");
    for (std::size_t i = 1; i < axle_positions.size(); ++i) {
        if (!(axle_positions[i] > axle_positions[i - 1]))
            throw Error(ErrorKind::InvalidInput, "axle positions must be strictly increasing");
    }
    if (!(velocity > 0.0)) throw Error(ErrorKind::InvalidInput, "velocity must be > 0");
    if (sensor_positions.empty()) throw Error(ErrorKind::InvalidInput, "at least one sensor required");
    for (double x : sensor_positions) {
        if (!(x > 0.0 && x < span)) throw Error(ErrorKind::InvalidInput, "sensor positions must lie inside the span");
        if (x < g1_position) throw Error(ErrorKind::InvalidInput, "sensors must lie behind G1");
    }
    if (!(noise_rms >= 0.0) || !(noise_relative >= 0.0)) throw Error(ErrorKind::InvalidInput, "noise must be >= 0");
    if (!(sample_rate > 0.0)) throw Error(ErrorKind::InvalidInput, "sample_rate must be > 0");
    if (!(wlm_spacing > 0.0)) throw Error(ErrorKind::InvalidInput, "wlm_spacing must be > 0");
    if (!(lead_time >= 0.0) || !(tail_time >= 0.0) || !(duration >= 0.0))
        throw Error(ErrorKind::InvalidInput, "times must be >= 0");
    if (!(pulse_width > 0.0)) throw Error(ErrorKind::InvalidInput, "pulse_width must be > 0");
    if (!(local_frequency >= 0.0) || !(local_width > 0.0))
        throw Error(ErrorKind::InvalidInput, "local response needs frequency >= 0 and width > 0");
}

double modal_frequency(const SyntheticScenario& scenario, int k) {
    if (k <= static_cast<int>(scenario.modal_frequencies.size())) return scenario.modal_frequencies[k - 1];
    return scenario.modal_frequencies.front() * k * k;
}

double modal_damping(const SyntheticScenario& scenario, int k) {
    if (k <= static_cast<int>(scenario.modal_damping.size())) return scenario.modal_damping[k - 1];
    return scenario.modal_damping.back();
}

std::int64_t recording_samples(const SyntheticScenario& sc) {
    if (sc.duration > 0.0) return static_cast<std::int64_t>(std::floor(sc.duration * sc.sample_rate));
    const double last_offset = sc.axle_positions.empty() ? 0.0 : sc.axle_positions.back();
    const double exit_time = (sc.span + last_offset - leading_axle_start(sc)) / sc.velocity;
    return static_cast<std::int64_t>(std::ceil((exit_time + sc.tail_time) * sc.sample_rate)) + 1;
}

std::pair<PassageRecord, LabelSet> simulate_passage(const SyntheticScenario& sc) {
    sc.validate();
    const auto n = recording_samples(sc);
    const double fs = sc.sample_rate;
    const double x0 = leading_axle_start(sc);
    const auto n_axles = sc.axle_positions.size();
    const auto n_sensors = static_cast<Eigen::Index>(sc.sensor_positions.size());

    // Time at which axle a reaches coordinate x.
    auto arrival = [&](std::size_t a, double x) { return (x - x0 + sc.axle_positions[a]) / sc.velocity; };

    const double recording_end = static_cast<double>(n - 1) / fs;
    for (std::size_t a = 0; a < n_axles; ++a) {
        if (arrival(a, sc.span) > recording_end)
            throw Error(ErrorKind::DurationTooShort, "axle " + std::to_string(a) +
                                                         " is still on the bridge when the recording ends");
    }

    PassageRecord passage;
    passage.id = sc.id;
    passage.sample_rate = fs;
    passage.wlm_spacing = sc.wlm_spacing;
    passage.wlm_spacing_uncertainty = sc.wlm_spacing_uncertainty;
    passage.sensor_offsets.reserve(sc.sensor_positions.size());
    for (double x : sc.sensor_positions) passage.sensor_offsets.push_back(x - sc.g1_position);

    // Modal accelerations, then projection onto the sensor mode shapes.
    passage.accel = Matrix::Zero(n, n_sensors);
    const double crossing = sc.span / sc.velocity;
    std::vector<double> modal(static_cast<std::size_t>(n));
    for (int k = 1; k <= sc.n_modes; ++k) {
        std::fill(modal.begin(), modal.end(), 0.0);
        const double omega = 2.0 * std::numbers::pi * modal_frequency(sc, k);
        const double zeta = modal_damping(sc, k);
        const double big_omega = k * std::numbers::pi * sc.velocity / sc.span;
        for (std::size_t a = 0; a < n_axles; ++a) {
            const double amplitude = 2.0 * sc.axle_loads[a] / (sc.mass_per_length * sc.span);
            accumulate_mode_response(modal, amplitude, omega, zeta, big_omega, arrival(a, 0.0), crossing, fs);
        }
        for (Eigen::Index s = 0; s < n_sensors; ++s) {
            const double shape = std::sin(k * std::numbers::pi * sc.sensor_positions[s] / sc.span);
            for (std::int64_t i = 0; i < n; ++i) passage.accel(i, s) += shape * modal[i];
        }
    }

    if (sc.local_gain != 0.0) {
        const double sigma = sc.local_width / sc.velocity;
        const double omega = 2.0 * std::numbers::pi * sc.local_frequency;
        const auto reach = static_cast<std::int64_t>(std::ceil(6.0 * sigma * fs));
        for (Eigen::Index s = 0; s < n_sensors; ++s) {
            for (std::size_t a = 0; a < n_axles; ++a) {
                const double centre = arrival(a, sc.sensor_positions[s]);
                const auto mid = static_cast<std::int64_t>(std::llround(centre * fs));
                const double amplitude = sc.local_gain * sc.axle_loads[a];
                for (std::int64_t i = std::max<std::int64_t>(0, mid - reach); i <= std::min(n - 1, mid + reach); ++i) {
                    const double tau = static_cast<double>(i) / fs - centre;
                    passage.accel(i, s) += amplitude * std::exp(-0.5 * (tau / sigma) * (tau / sigma)) * std::cos(omega * tau);
                }
            }
        }
    }

    if (sc.noise_rms > 0.0 || sc.noise_relative > 0.0) {
        Rng rng(sc.seed);
        for (Eigen::Index s = 0; s < n_sensors; ++s) {
            double sigma = sc.noise_rms;
            if (sc.noise_relative > 0.0) {
                const double rms = std::sqrt(passage.accel.col(s).squaredNorm() / static_cast<double>(n));
                sigma = sc.noise_relative * rms;
            }
            for (std::int64_t i = 0; i < n; ++i) passage.accel(i, s) += rng.normal(0.0, sigma);
        }
    }

    // Wheel-load channels: triangular pulses centred on the exact arrival times.
    passage.wheel_load = Matrix::Zero(n, 2);
    const double half_width = sc.pulse_width / 2.0;
    const double g_positions[2] = {sc.g1_position, sc.g1_position + sc.wlm_spacing};
    for (int g = 0; g < 2; ++g) {
        for (std::size_t a = 0; a < n_axles; ++a) {
            const double centre = arrival(a, g_positions[g]) * fs;
            const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(centre - half_width)));
            const auto hi = std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::floor(centre + half_width)));
            for (std::int64_t i = lo; i <= hi; ++i) {
                const double weight = 1.0 - std::abs(static_cast<double>(i) - centre) / half_width;
                if (weight > 0.0) passage.wheel_load(i, g) += sc.axle_loads[a] * 1e-3 * weight;
            }
        }
    }

    LabelSet labels;
    labels.axle_velocities.assign(n_axles, sc.velocity);
    labels.crossing_indices.resize(static_cast<Eigen::Index>(n_axles), n_sensors);
    labels.uncertainty.resize(static_cast<Eigen::Index>(n_axles), n_sensors);
    const ingest::UncertaintyBudget budget{fs, sc.wlm_spacing, sc.wlm_spacing_uncertainty};
    for (std::size_t a = 0; a < n_axles; ++a) {
        for (Eigen::Index s = 0; s < n_sensors; ++s) {
            labels.crossing_indices(static_cast<Eigen::Index>(a), s) =
                std::llround(arrival(a, sc.sensor_positions[s]) * fs);
            labels.uncertainty(static_cast<Eigen::Index>(a), s) =
                ingest::label_uncertainty(sc.velocity, passage.sensor_offsets[s], budget);
        }
    }
    labels.targets = ingest::build_binary_labels(labels.crossing_indices, n);
    return {std::move(passage), std::move(labels)};
}

std::vector<double> train_axle_layout(int n_axles, Rng& rng) {
    std::vector<double> offsets;
    offsets.reserve(static_cast<std::size_t>(std::max(n_axles, 0)));
    double x = 0.0;
    int in_car = 0;
    while (static_cast<int>(offsets.size()) < n_axles) {
        offsets.push_back(x);
        const auto placed = offsets.size();
        if (placed % 2 == 1) {
            x += rng.uniform(2.0, 3.0);  // wheelset spacing inside a bogie
        } else if (++in_car % 2 == 1) {
            x += rng.uniform(5.0, 12.0);  // between the bogies of one car
        } else {
            x += rng.uniform(3.5, 6.0);  // across the coupling to the next car
        }
    }
    return offsets;
}

SyntheticScenario random_scenario(const DatasetSpec& spec, std::uint64_t seed, std::int64_t index) {
    Rng rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(index) * 0xBF58476D1CE4E5B9ULL + 1);
    SyntheticScenario sc;
    char id[48];
    std::snprintf(id, sizeof id, "syn-%llu-%05lld", static_cast<unsigned long long>(seed),
                  static_cast<long long>(index));
    sc.id = id;
    sc.n_modes = spec.n_modes;
    sc.sensor_positions = spec.sensor_positions;
    sc.noise_relative = spec.noise_relative;
    sc.local_gain = spec.local_gain;
    sc.velocity = rng.uniform(spec.min_velocity, spec.max_velocity);
    const int n_axles = static_cast<int>(rng.uniform_int(spec.min_axles, spec.max_axles));
    sc.axle_positions = train_axle_layout(n_axles, rng);
    sc.axle_loads.resize(sc.axle_positions.size());
    for (double& load : sc.axle_loads) load = rng.uniform(spec.min_axle_load, spec.max_axle_load);
    sc.seed = rng.next_u64();
    return sc;
}

}  // namespace axle::synth
