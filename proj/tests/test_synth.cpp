#include "axle/error.hpp"
#include "axle/ingest.hpp"
#include "axle/synth.hpp"

#include "doctest.h"

#include <cmath>

using namespace axle;
using namespace axle::synth;

namespace {

SyntheticScenario base_scenario() {
    SyntheticScenario sc;
    sc.axle_positions = {0.0, 2.5, 12.0, 14.5};
    sc.axle_loads = {90e3, 90e3, 100e3, 100e3};
    sc.velocity = 25.0;
    return sc;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("no load, no noise: silent bridge") {
    auto sc = base_scenario();
    sc.axle_loads.assign(sc.axle_loads.size(), 0.0);
    const auto [passage, labels] = simulate_passage(sc);
    CHECK(max_abs(passage.accel) == 0.0);
    CHECK(labels.n_axles() == 4);
}

TEST_CASE("bit-identical for the same seed") {
    auto sc = base_scenario();
    sc.noise_relative = 0.05;
    sc.local_gain = 1e-6;
    sc.seed = 42;
    const auto a = simulate_passage(sc);
    const auto b = simulate_passage(sc);
    CHECK(a.first.accel == b.first.accel);
    CHECK(a.first.wheel_load == b.first.wheel_load);
    CHECK(a.second.crossing_indices == b.second.crossing_indices);

    sc.seed = 43;
    CHECK_FALSE(simulate_passage(sc).first.accel == a.first.accel);
}

TEST_CASE("linearity in the loads") {
    auto sc = base_scenario();
    sc.local_gain = 1e-6;
    const auto one = simulate_passage(sc).first.accel;
    for (auto& l : sc.axle_loads) l *= 2.0;
    const auto two = simulate_passage(sc).first.accel;
    CHECK(max_abs(two - 2.0 * one) <= 1e-9 * max_abs(two));
}

TEST_CASE("superposition of two axle sets") {
    auto sc = base_scenario();
    sc.local_gain = 1e-6;
    const auto all = simulate_passage(sc).first.accel;

    // Same positions, complementary loads: the first pair only, then the
    // second pair only.
    auto first = sc;
    first.axle_loads = {90e3, 90e3, 0.0, 0.0};
    auto second = sc;
    second.axle_loads = {0.0, 0.0, 100e3, 100e3};
    const auto sum = simulate_passage(first).first.accel + simulate_passage(second).first.accel;
    CHECK(max_abs(all - sum) <= 1e-9 * max_abs(all));
}

TEST_CASE("ground truth survives ingest") {
    const DatasetSpec spec;
    for (std::int64_t i = 0; i < 20; ++i) {
        const auto sc = random_scenario(spec, 7, i);
        const auto [passage, truth] = simulate_passage(sc);
        const auto result = ingest::label_passage(passage);
        REQUIRE(result.verdict == ingest::Verdict::Accepted);
        CHECK(result.labels.n_axles() == static_cast<std::int64_t>(sc.axle_positions.size()));
        // Velocity from integer peak positions: at most one sample of
        // quantisation over the measuring-point spacing.
        const double dt = sc.wlm_spacing / sc.velocity * sc.sample_rate;
        const double bound = sc.velocity * (dt / (dt - 1.0) - 1.0) + 1e-9;
        for (double v : result.labels.axle_velocities) CHECK(std::abs(v - sc.velocity) <= bound);
        // Crossing indices within a sample of the exact ones.
        CHECK((result.labels.crossing_indices - truth.crossing_indices).cwiseAbs().maxCoeff() <= 1);
    }
}

TEST_CASE("random scenarios respect the dataset ranges") {
    const DatasetSpec spec;
    for (std::int64_t i = 0; i < 100; ++i) {
        const auto sc = random_scenario(spec, 1, i);
        CHECK(sc.axle_positions.size() >= 2);
        CHECK(sc.axle_positions.size() <= 16);
        CHECK(sc.velocity >= 10.0);
        CHECK(sc.velocity <= 57.0);
        for (std::size_t k = 1; k < sc.axle_positions.size(); ++k)
            CHECK(sc.axle_positions[k] > sc.axle_positions[k - 1]);
        CHECK(sc.noise_relative == doctest::Approx(0.05));
    }
    // Scenarios depend only on (seed, index).
    CHECK(random_scenario(spec, 1, 5).velocity == random_scenario(spec, 1, 5).velocity);
    CHECK(random_scenario(spec, 1, 5).id != random_scenario(spec, 1, 6).id);
}

TEST_CASE("relative noise level") {
    auto sc = base_scenario();
    sc.local_gain = 1e-6;
    const auto clean = simulate_passage(sc).first.accel;
    sc.noise_relative = 0.05;
    sc.seed = 9;
    const auto noisy = simulate_passage(sc).first.accel;
    for (Eigen::Index s = 0; s < clean.cols(); ++s) {
        const double rms_clean = std::sqrt(clean.col(s).squaredNorm() / static_cast<double>(clean.rows()));
        const double rms_noise =
            std::sqrt((noisy.col(s) - clean.col(s)).squaredNorm() / static_cast<double>(clean.rows()));
        CHECK(rms_noise == doctest::Approx(0.05 * rms_clean).epsilon(0.1));
    }
}

TEST_CASE("invalid scenarios") {
    auto sc = base_scenario();
    sc.velocity = 0.0;
    CHECK_THROWS_AS(simulate_passage(sc), Error);

    sc = base_scenario();
    sc.axle_positions = {0.0, 3.0, 2.0, 5.0};
    CHECK_THROWS_AS(simulate_passage(sc), Error);

    sc = base_scenario();
    sc.sensor_positions = {0.0};
    CHECK_THROWS_AS(simulate_passage(sc), Error);

    sc = base_scenario();
    sc.duration = 1.0;  // the train is still on the bridge
    try {
        simulate_passage(sc);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DurationTooShort);
    }
}
