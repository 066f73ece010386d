// Small synthetic datasets shared by the tests.
#pragma once

#include "axle/detector.hpp"
#include "axle/ingest.hpp"
#include "axle/scalogram.hpp"
#include "axle/synth.hpp"

#include <vector>

namespace fixtures {

inline std::vector<axle::detector::Example> synthetic_examples(int n_passages, std::uint64_t seed,
                                                               const axle::synth::DatasetSpec& spec = {}) {
    std::vector<axle::detector::Example> out;
    const auto specs = axle::scalogram::default_specs();
    for (int i = 0; i < n_passages; ++i) {
        const auto [passage, truth] = axle::synth::simulate_passage(axle::synth::random_scenario(spec, seed, i));
        const auto labelled = axle::ingest::label_passage(passage);
        for (int s = 0; s < static_cast<int>(passage.n_sensors()); ++s) {
            auto w = axle::scalogram::transform_passage(passage, labelled.labels, s, specs);
            out.push_back({std::move(w.scalogram), std::move(w.target), passage.id, s});
        }
    }
    return out;
}

inline axle::scalogram::Scalogram random_scalogram(std::int64_t n, std::uint64_t seed, int scales = 16,
                                                   int transforms = 6) {
    axle::Rng rng(seed);
    axle::scalogram::Scalogram s(n, scales, transforms);
    for (auto& v : s.data()) v = static_cast<float>(rng.uniform());
    return s;
}

}  // namespace fixtures
