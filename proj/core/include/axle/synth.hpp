#pragma once

#include "axle/random.hpp"
#include "axle/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace axle::synth {

/// A train crossing a simply supported beam at constant speed.
///
/// Positions along the bridge are measured from the left support. The first
/// wheel-load measuring point (G1) sits at `g1_position` (usually before the
/// bridge, so negative) and G2 `wlm_spacing` metres further on.
struct SyntheticScenario {
    std::string id = "synthetic";
    double span = 16.4;                          // m
    int n_modes = 3;
    std::vector<double> modal_frequencies{6.9};  // Hz; missing modes follow f_k = k^2 f_1
    std::vector<double> modal_damping{0.02};     // missing modes reuse the last entry
    double mass_per_length = 10000.0;            // kg/m
    std::vector<double> axle_positions;          // m behind the leading axle, first entry 0
    std::vector<double> axle_loads;              // N
    double velocity = 30.0;                      // m/s
    std::vector<double> sensor_positions{5.0, 11.0};  // m from the left support
    double noise_rms = 0.0;                      // m/s^2, absolute
    double noise_relative = 0.0;                 // if > 0: fraction of each sensor's clean RMS
    double sample_rate = 600.0;
    std::uint64_t seed = 0;

    double g1_position = -4.0;    // m
    double wlm_spacing = 14.40;   // m
    double wlm_spacing_uncertainty = 0.20;
    double lead_time = 0.5;       // s before the leading axle reaches G1
    double tail_time = 0.5;       // s after the last axle leaves the bridge
    double duration = 0.0;        // s; 0 derives the length from lead/tail time
    double pulse_width = 5.0;     // samples, base of the triangular wheel-load pulse

    // Sensor-local response: a Gaussian-windowed burst centred on each axle's
    // crossing of a sensor, amplitude local_gain * load. Zero disables it.
    double local_gain = 0.0;        // m/s^2 per N
    double local_frequency = 64.0;  // Hz
    double local_width = 0.5;       // m; the burst lasts local_width / velocity

    void validate() const;
};

/// Modal frequency (Hz) and damping ratio of mode k (1-based).
double modal_frequency(const SyntheticScenario& scenario, int k);
double modal_damping(const SyntheticScenario& scenario, int k);

/// Recording length implied by the scenario.
std::int64_t recording_samples(const SyntheticScenario& scenario);

/// Simulates the crossing. Each mode is a damped oscillator driven by the
/// half-sine load pattern of every axle on the bridge, solved in closed form
/// per axle, so the output is exact at the sample instants and linear in the
/// loads. Labels carry the exact crossing indices.
std::pair<PassageRecord, LabelSet> simulate_passage(const SyntheticScenario& scenario);

/// Ranges for randomly drawn scenarios.
struct DatasetSpec {
    int min_axles = 2;
    int max_axles = 16;
    double min_velocity = 10.0;
    double max_velocity = 57.0;
    double min_axle_load = 80e3;
    double max_axle_load = 110e3;
    double noise_relative = 0.05;
    int n_modes = 3;
    double local_gain = 1e-5;
    std::vector<double> sensor_positions{2.7, 5.5, 8.2, 10.9, 13.7};  // m, spread along the span
};

/// Draws scenario number `index` of a dataset. Each scenario depends only on
/// (seed, index), so datasets can be generated in any order or in parallel.
SyntheticScenario random_scenario(const DatasetSpec& spec, std::uint64_t seed, std::int64_t index);

/// Bogie-style axle layout: pairs 2.5 m apart, bogies and cars separated by
/// a few metres. Returns offsets behind the leading axle.
std::vector<double> train_axle_layout(int n_axles, Rng& rng);

}  // namespace axle::synth
