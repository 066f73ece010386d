#include "axle/postprocess.hpp"

#include "axle/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>

namespace axle::postprocess {

std::int64_t min_distance_rule(double min_wheel_distance, double max_velocity, double sample_rate) {
    if (!(min_wheel_distance > 0.0) || !(max_velocity > 0.0) || !(sample_rate > 0.0))
        throw Error(ErrorKind::InvalidInput, "min_distance_rule needs positive inputs");
    return static_cast<std::int64_t>(std::floor(min_wheel_distance * sample_rate / max_velocity + 0.5));
}

Scores score(const Counts& c) {
    const bool nothing_at_all = c.tp + c.fn == 0 && c.tp + c.fp == 0;
    Scores s;
    if (nothing_at_all) return {1.0, 1.0, 1.0};
    s.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    s.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

namespace {

void finish_report(DetectionReport& report, std::span<const std::int64_t> predicted,
                   std::span<const std::int64_t> ground_truth, const std::vector<bool>& pred_used,
                   const std::vector<bool>& gt_used) {
    for (std::size_t j = 0; j < predicted.size(); ++j) {
        if (!pred_used[j]) report.false_positives.push_back(predicted[j]);
    }
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        if (!gt_used[i]) report.false_negatives.push_back(ground_truth[i]);
    }
    std::sort(report.matches.begin(), report.matches.end(),
              [](const Match& a, const Match& b) { return a.gt_rank < b.gt_rank; });

    report.counts.tp = static_cast<std::int64_t>(report.matches.size());
    report.counts.fp = static_cast<std::int64_t>(report.false_positives.size());
    report.counts.fn = static_cast<std::int64_t>(report.false_negatives.size());
    report.scores = score(report.counts);

    if (!report.matches.empty()) {
        double abs_sum = 0.0;
        double sum = 0.0;
        for (const auto& m : report.matches) {
            abs_sum += std::abs(static_cast<double>(m.temporal_error));
            sum += static_cast<double>(m.temporal_error);
        }
        const double n = static_cast<double>(report.matches.size());
        const double mean = sum / n;
        double sq = 0.0;
        for (const auto& m : report.matches) {
            const double d = static_cast<double>(m.temporal_error) - mean;
            sq += d * d;
        }
        report.mean_abs_temporal_error = abs_sum / n;
        report.std_temporal_error = std::sqrt(sq / n);
    }
}

}  // namespace

DetectionReport match_peaks(std::span<const std::int64_t> predicted, std::span<const std::int64_t> ground_truth,
                            std::span<const std::int64_t> gt_thresholds) {
    if (gt_thresholds.size() != ground_truth.size())
        throw Error(ErrorKind::InvalidInput, "one threshold per ground-truth axle required");

    // (distance, gt position, pred position)
    std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        const auto lo = std::lower_bound(predicted.begin(), predicted.end(), ground_truth[i] - gt_thresholds[i]);
        for (auto it = lo; it != predicted.end() && *it <= ground_truth[i] + gt_thresholds[i]; ++it) {
            pairs.emplace_back(std::abs(*it - ground_truth[i]), i, static_cast<std::size_t>(it - predicted.begin()));
        }
    }
    std::sort(pairs.begin(), pairs.end());

    DetectionReport report;
    std::vector<bool> gt_used(ground_truth.size(), false);
    std::vector<bool> pred_used(predicted.size(), false);
    for (const auto& [distance, i, j] : pairs) {
        if (gt_used[i] || pred_used[j]) continue;
        gt_used[i] = true;
        pred_used[j] = true;
        Match m;
        m.gt_index = ground_truth[i];
        m.pred_index = predicted[j];
        m.temporal_error = predicted[j] - ground_truth[i];
        m.gt_rank = i;
        report.matches.push_back(m);
    }
    finish_report(report, predicted, ground_truth, pred_used, gt_used);
    return report;
}

DetectionReport match_peaks(std::span<const std::int64_t> predicted, std::span<const std::int64_t> ground_truth,
                            std::int64_t threshold) {
    const std::vector<std::int64_t> thresholds(ground_truth.size(), threshold);
    auto report = match_peaks(predicted, ground_truth, std::span<const std::int64_t>(thresholds));
    report.threshold = static_cast<double>(threshold);
    report.unit = ThresholdUnit::Samples;
    return report;
}

std::vector<std::int64_t> spatial_thresholds(double threshold_m, std::span<const double> velocities,
                                             double sample_rate) {
    std::vector<std::int64_t> out;
    out.reserve(velocities.size());
    for (double v : velocities) {
        if (!(v > 0.0)) throw Error(ErrorKind::InvalidInput, "axle velocities must be > 0");
        out.push_back(static_cast<std::int64_t>(std::llround(threshold_m * sample_rate / v)));
    }
    return out;
}

void apply_spatial_metrics(DetectionReport& report, std::span<const double> gt_velocities, double sample_rate) {
    double abs_sum = 0.0;
    for (auto& m : report.matches) {
        if (m.gt_rank >= gt_velocities.size())
            throw Error(ErrorKind::InvalidInput, "no velocity for ground-truth axle " + std::to_string(m.gt_rank));
        m.spatial_error = static_cast<double>(m.temporal_error) * gt_velocities[m.gt_rank] / sample_rate;
        abs_sum += std::abs(m.spatial_error);
    }
    report.mean_abs_spatial_error =
        report.matches.empty() ? std::numeric_limits<double>::quiet_NaN()
                               : abs_sum / static_cast<double>(report.matches.size());
}

DetectionReport match_peaks_spatial(std::span<const std::int64_t> predicted,
                                    std::span<const std::int64_t> ground_truth,
                                    std::span<const double> gt_velocities, double threshold_m, double sample_rate) {
    if (gt_velocities.size() != ground_truth.size())
        throw Error(ErrorKind::InvalidInput, "one velocity per ground-truth axle required");
    const auto thresholds = spatial_thresholds(threshold_m, gt_velocities, sample_rate);
    auto report = match_peaks(predicted, ground_truth, std::span<const std::int64_t>(thresholds));
    report.threshold = threshold_m;
    report.unit = ThresholdUnit::Metres;
    apply_spatial_metrics(report, gt_velocities, sample_rate);
    return report;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error(ErrorKind::InvalidInput, "quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

AggregateSummary aggregate(std::span<const KeyedReport> reports, GroupBy group_by) {
    if (reports.empty()) throw Error(ErrorKind::InvalidInput, "nothing to aggregate");
    AggregateSummary summary;
    summary.group_by = group_by;
    summary.pooled.group = "global";

    std::map<std::string, Counts> groups;
    for (const auto& r : reports) {
        summary.pooled.counts += r.report.counts;
        switch (group_by) {
            case GroupBy::Global: break;
            case GroupBy::PerPassage: groups[r.passage_id + "/" + std::to_string(r.sensor)] += r.report.counts; break;
            case GroupBy::PerSensor: groups["sensor" + std::to_string(r.sensor)] += r.report.counts; break;
        }
    }
    summary.pooled.scores = score(summary.pooled.counts);
    if (group_by == GroupBy::Global) groups["global"] = summary.pooled.counts;

    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    for (const auto& [key, counts] : groups) {
        GroupSummary g{key, counts, score(counts)};
        precision.push_back(g.scores.precision);
        recall.push_back(g.scores.recall);
        f1.push_back(g.scores.f1);
        summary.groups.push_back(std::move(g));
    }
    summary.precision = {quantile(precision, 0.25), quantile(precision, 0.5)};
    summary.recall = {quantile(recall, 0.25), quantile(recall, 0.5)};
    summary.f1 = {quantile(f1, 0.25), quantile(f1, 0.5)};
    return summary;
}

}  // namespace axle::postprocess
