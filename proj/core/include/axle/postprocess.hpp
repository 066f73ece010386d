#pragma once

#include "axle/peaks.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace axle::postprocess {

/// Minimum peak spacing in samples for the closest wheel spacing at the
/// fastest expected speed, rounded half up.
std::int64_t min_distance_rule(double min_wheel_distance, double max_velocity, double sample_rate);

struct Match {
    std::int64_t gt_index = 0;
    std::int64_t pred_index = 0;
    std::int64_t temporal_error = 0;  // pred - gt, samples
    double spatial_error = std::numeric_limits<double>::quiet_NaN();  // m, signed
    std::size_t gt_rank = 0;          // position of the axle in the ground-truth list
};

struct Counts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;

    Counts& operator+=(const Counts& other) {
        tp += other.tp;
        fp += other.fp;
        fn += other.fn;
        return *this;
    }
};

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Precision/recall/F1. With nothing to find and nothing found all three are
/// 1; any other empty denominator gives 0.
Scores score(const Counts& counts);

enum class ThresholdUnit { Samples, Metres };

struct DetectionReport {
    std::vector<Match> matches;
    std::vector<std::int64_t> false_positives;  // predicted indices
    std::vector<std::int64_t> false_negatives;  // ground-truth indices
    Counts counts;
    Scores scores;
    double mean_abs_temporal_error = 0.0;  // samples
    double std_temporal_error = 0.0;       // samples, population std of signed errors
    double mean_abs_spatial_error = std::numeric_limits<double>::quiet_NaN();  // m
    double threshold = 0.0;
    ThresholdUnit unit = ThresholdUnit::Samples;
};

/// Greedy one-to-one matching: all (gt, pred) pairs within the threshold,
/// accepted nearest first (ties: earlier gt, then earlier pred).
DetectionReport match_peaks(std::span<const std::int64_t> predicted, std::span<const std::int64_t> ground_truth,
                            std::int64_t threshold);

/// Same, with a separate sample threshold for every ground-truth axle.
DetectionReport match_peaks(std::span<const std::int64_t> predicted, std::span<const std::int64_t> ground_truth,
                            std::span<const std::int64_t> gt_thresholds);

/// round(threshold_m * sample_rate / v) for each axle velocity.
std::vector<std::int64_t> spatial_thresholds(double threshold_m, std::span<const double> velocities,
                                             double sample_rate);

/// Fills the spatial error of every match from its axle's velocity.
void apply_spatial_metrics(DetectionReport& report, std::span<const double> gt_velocities, double sample_rate);

/// Matching with a distance threshold in metres converted per axle, followed
/// by spatial error computation.
DetectionReport match_peaks_spatial(std::span<const std::int64_t> predicted,
                                    std::span<const std::int64_t> ground_truth,
                                    std::span<const double> gt_velocities, double threshold_m, double sample_rate);

/// Linear-interpolated quantile (q in [0, 1]) of unsorted values.
double quantile(std::vector<double> values, double q);

enum class GroupBy { Global, PerPassage, PerSensor };

struct KeyedReport {
    std::string passage_id;
    int sensor = 0;
    DetectionReport report;
};

struct GroupSummary {
    std::string group;
    Counts counts;
    Scores scores;
};

struct DistributionSummary {
    double q25 = 0.0;
    double median = 0.0;
};

struct AggregateSummary {
    GroupBy group_by = GroupBy::Global;
    GroupSummary pooled;              // counts pooled over every report
    std::vector<GroupSummary> groups; // one per passage / sensor, sorted by key
    DistributionSummary precision;    // over groups
    DistributionSummary recall;
    DistributionSummary f1;
};

AggregateSummary aggregate(std::span<const KeyedReport> reports, GroupBy group_by);

}  // namespace axle::postprocess
