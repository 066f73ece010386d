#pragma once

#include "axle/detector.hpp"
#include "axle/ingest.hpp"
#include "axle/peaks.hpp"
#include "axle/scalogram.hpp"
#include "axle/synth.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace axle {

struct SynthSection {
    int n_passages = 40;
    synth::DatasetSpec dataset;
};

struct EvaluateSection {
    PeakParams peaks;
    std::vector<std::int64_t> thresholds_samples{20};
    std::vector<double> thresholds_m{2.00, 0.37, 0.20};
    /// Which split to score: "test", "val", "train" or "all".
    std::string split = "test";
};

/// Everything a command needs; serialised as one JSON document with every
/// default written out.
struct RunConfig {
    std::uint64_t seed = 0;
    bool deterministic = true;
    int workers = 1;
    std::string data_dir = "data";
    std::string out_dir = "runs";

    SynthSection synth;
    ingest::WheelLoadPeakParams ingest;
    std::array<scalogram::WaveletSpec, 6> wavelets = scalogram::default_specs();
    detector::ModelConfig model;
    detector::TrainConfig train;
    EvaluateSection evaluate;
    std::vector<double> sweep_gammas{0.0, 0.5, 1.0, 2.0, 2.5, 3.0};

    /// Throws Error(Config) on the first invalid field.
    void validate() const;
};

/// Parses a JSON document; absent keys keep their defaults, unknown keys are
/// rejected.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

}  // namespace axle
