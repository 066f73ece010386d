#pragma once

#include "axle/config.hpp"
#include "axle/detector.hpp"
#include "axle/ingest.hpp"
#include "axle/io.hpp"
#include "axle/postprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace axle::pipeline {

namespace fs = std::filesystem;

using Log = std::function<void(const std::string&)>;

/// Runs fn(i) for i in [0, n) on `workers` threads. Results must be written
/// by index; the first exception (lowest index) is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------- synth

struct SynthSummary {
    std::int64_t passages = 0;
    std::int64_t axles = 0;
};

/// Writes cfg.synth.n_passages passages (<id>.meta / <id>.dat) plus their
/// exact ground truth (<id>.truth.json) into `dir`.
SynthSummary run_synth(const RunConfig& cfg, const fs::path& dir, const Log& log = {});

// ---------------------------------------------------------------- label

struct LabelSummary {
    ingest::IngestStats stats;
    std::vector<std::string> rejected;  // "id: reason"
    std::vector<double> velocities;     // every accepted axle
};

/// Ingests every passage of `data_dir`; writes labels/<id>.json,
/// ingest_stats.json and velocity_histogram.csv (1 m/s bins) into `out_dir`.
LabelSummary run_label(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir, const Log& log = {});

/// Histogram rows "bin_low,bin_high,count" with unit-width bins.
std::string velocity_histogram_csv(const std::vector<double>& velocities, double bin_width = 1.0);

// ---------------------------------------------------------------- dataset

/// One scalogram window per (accepted passage, sensor).
struct Dataset {
    std::vector<detector::Example> examples;
    std::vector<std::vector<double>> velocities;  // per example: one per axle
    std::vector<double> sample_rates;             // per example
    ingest::IngestStats stats;
    std::string fingerprint;                      // over the passage files
};

/// Ingest + transform. With `cache_dir`, scalograms are read from
/// <cache_dir>/<id>_s<k>.bin when present and written there otherwise.
Dataset build_dataset(const RunConfig& cfg, const fs::path& data_dir, const std::optional<fs::path>& cache_dir = {},
                      const Log& log = {});

/// Writes the scalogram cache for every window plus scalogram_example.csv
/// (time, scale, transform, value of the first window).
void run_transform(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir, const Log& log = {});

std::vector<std::size_t> select_split(const Dataset& data, const detector::TrainConfig& train, const std::string& split);

// ---------------------------------------------------------------- train

struct TrainOutcome {
    detector::TrainResult result;
    fs::path checkpoint;
};

/// Trains (or resumes `resume_from`) and writes model.ckpt, history.csv and
/// train_summary.json into `out_dir`.
TrainOutcome run_train(const RunConfig& cfg, const Dataset& data, const fs::path& out_dir,
                       const std::optional<fs::path>& resume_from = {}, const Log& log = {});

struct SweepRow {
    double gamma = 0.0;
    int best_epoch = 0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    bool unusable = false;
};

/// One training run per gamma; writes sweep.csv and one sub-directory per
/// run.
std::vector<SweepRow> run_sweep(const RunConfig& cfg, const Dataset& data, const std::vector<double>& gammas,
                                const fs::path& out_dir, const Log& log = {});
std::string sweep_csv(const std::vector<SweepRow>& rows);

// ---------------------------------------------------------------- predict / evaluate

struct Prediction {
    std::string passage_id;
    int sensor = 0;
    std::int64_t window_start = 0;
    std::vector<double> probabilities;
    std::vector<std::int64_t> peaks;  // window-relative
};

std::vector<Prediction> predict_windows(const detector::DetectorModel& model, const Dataset& data,
                                        const std::vector<std::size_t>& indices, const PeakParams& peaks,
                                        int workers);

/// predictions.csv: passage_id, sensor, window_start, peak_index,
/// recording_index, probability.
std::string predictions_csv(const std::vector<Prediction>& predictions);

struct ThresholdSummary {
    std::string threshold;
    postprocess::GroupSummary global;
    double mean_abs_temporal_error = 0.0;
    double std_temporal_error = 0.0;
    double mean_abs_spatial_error = 0.0;
    postprocess::AggregateSummary per_passage;
    postprocess::AggregateSummary per_sensor;
};

struct EvaluationOutcome {
    std::vector<io::ReportRow> rows;
    std::vector<ThresholdSummary> summaries;
};

/// Scores predictions at every configured threshold (samples and metres).
EvaluationOutcome evaluate_predictions(const RunConfig& cfg, const Dataset& data,
                                       const std::vector<std::size_t>& indices,
                                       const std::vector<Prediction>& predictions);

/// Writes report.csv, deviations.csv, distributions.csv and summary.json.
void write_evaluation(const EvaluationOutcome& outcome, const fs::path& out_dir);

}  // namespace axle::pipeline
