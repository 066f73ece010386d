#pragma once

#include "axle/detector.hpp"
#include "axle/postprocess.hpp"
#include "axle/scalogram.hpp"
#include "axle/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace axle::io {

namespace fs = std::filesystem;

/// Writes `content` to a temporary sibling and renames it over `path`, so
/// readers never observe a partial file.
void write_file_atomic(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

// Passage file pair: <id>.meta holds "key = value" lines (id, sample_rate,
// sensor_offsets as a comma-separated list, wlm_spacing,
// wlm_spacing_uncertainty); <id>.dat holds one sample per line with
// space-separated columns G1 G2 accel_0 ... accel_{n-1}.
void write_passage(const PassageRecord& passage, const fs::path& dir);
PassageRecord read_passage(const fs::path& meta_path);
/// Sorted paths of every *.meta file in `dir`.
std::vector<fs::path> list_passages(const fs::path& dir);

/// Label document: JSON with id, n_samples, axle_velocities and, per sensor,
/// crossing_indices and uncertainty.
std::string labels_to_json(const std::string& id, const LabelSet& labels, std::int64_t n_samples);
void write_labels(const fs::path& path, const std::string& id, const LabelSet& labels, std::int64_t n_samples);
struct LabelDocument {
    std::string id;
    std::int64_t n_samples = 0;
    LabelSet labels;  // targets rebuilt from the indices
};
LabelDocument read_labels(const fs::path& path);

/// Scalogram cache: four little-endian int64 (n_s, n_f, n_t, window_start)
/// followed by n_s * n_f * n_t little-endian float32 values, time-major.
void write_scalogram(const fs::path& path, const scalogram::Scalogram& s);
scalogram::Scalogram read_scalogram(const fs::path& path);

/// Training history: epoch, loss, val_precision, val_recall, val_F1.
std::string history_csv(std::span<const detector::EpochRecord> history);

struct ReportRow {
    std::string passage_id;
    int sensor = 0;
    std::string threshold;  // e.g. "20" (samples) or "0.37m"
    postprocess::DetectionReport report;
};

/// One line per (passage, sensor, threshold): passage_id, sensor, threshold,
/// tp, fp, fn, precision, recall, f1, mean_abs_temporal_err,
/// mean_abs_spatial_err.
std::string report_csv(std::span<const ReportRow> rows);

/// Every match of every row: passage_id, sensor, threshold, gt_index,
/// pred_index, temporal_error, spatial_error.
std::string deviations_csv(std::span<const ReportRow> rows);

/// SHA-256 (hex) over the contents of the given files, in order.
std::string fingerprint_files(std::span<const fs::path> files);
std::string fingerprint_text(std::string_view text);

}  // namespace axle::io
