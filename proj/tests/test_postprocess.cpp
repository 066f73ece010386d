#include "axle/error.hpp"
#include "axle/peaks.hpp"
#include "axle/postprocess.hpp"
#include "axle/random.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace axle;
using namespace axle::postprocess;

namespace {

using Idx = std::vector<std::int64_t>;

std::vector<double> triangle(std::size_t n, std::int64_t centre, double height, std::int64_t half_width) {
    std::vector<double> x(n, 0.0);
    for (std::int64_t k = -half_width; k <= half_width; ++k) {
        const auto t = centre + k;
        if (t >= 0 && t < static_cast<std::int64_t>(n))
            x[static_cast<std::size_t>(t)] =
                std::max(x[static_cast<std::size_t>(t)], height * (1.0 - std::abs(double(k)) / (half_width + 1)));
    }
    return x;
}

// Random traces with plateaus, repeated values and edges that rise.
std::vector<double> random_trace(Rng& rng, std::size_t n) {
    std::vector<double> x(n);
    const int levels = static_cast<int>(rng.uniform_int(3, 40));
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && rng.uniform() < 0.2) {
            x[i] = x[i - 1];
        } else {
            x[i] = static_cast<double>(rng.uniform_int(0, levels)) / levels;
        }
    }
    return x;
}

}  // namespace

TEST_CASE("minimum distance rule") {
    CHECK(min_distance_rule(2.0, 61.1, 600.0) == 20);
    CHECK(min_distance_rule(2.0, 2.0, 1.0) == 1);
    CHECK(min_distance_rule(3.0, 60.0, 600.0) == 30);
    CHECK(min_distance_rule(2.5, 1.0, 1.0) == 3);  // half rounds up
}

TEST_CASE("find_peaks examples") {
    const PeakParams defaults;
    CHECK(find_peaks(std::vector<double>(100, 0.4), defaults).empty());
    CHECK(find_peaks(triangle(100, 40, 0.9, 5), defaults) == Idx{40});

    auto two = triangle(120, 50, 0.8, 3);
    const auto second = triangle(120, 60, 0.5, 3);
    for (std::size_t i = 0; i < two.size(); ++i) two[i] = std::max(two[i], second[i]);
    CHECK(find_peaks(two, defaults) == Idx{50});

    std::vector<double> plateau(100, 0.2);
    plateau[50] = 0.3;  // prominence 0.1
    CHECK(find_peaks(plateau, defaults).empty());

    std::vector<double> flat_top(20, 0.0);
    for (int i = 5; i <= 8; ++i) flat_top[i] = 0.9;  // even plateau: 5..8 -> 6
    CHECK(find_peaks(flat_top, defaults) == Idx{6});
}

TEST_CASE("find_peaks equals the reference on random traces") {
    Rng rng(77);
    for (int draw = 0; draw < 10; ++draw) {
        PeakParams p;
        p.min_height = rng.uniform(0.01, 0.9);
        p.min_distance = rng.uniform_int(1, 40);
        p.min_prominence = rng.uniform(0.0, 0.5);
        for (int trial = 0; trial < 100; ++trial) {
            const auto x = random_trace(rng, static_cast<std::size_t>(rng.uniform_int(1, 500)));
            REQUIRE(find_peaks(x, p) == oracle::find_peaks(x, p));
        }
    }
}

TEST_CASE("peak parameter validation") {
    PeakParams p;
    p.min_height = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.min_distance = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.min_prominence = -0.1;
    CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("match_peaks examples") {
    auto r = match_peaks(Idx{105, 400}, Idx{100, 200}, 20);
    CHECK(r.counts.tp == 1);
    CHECK(r.counts.fp == 1);
    CHECK(r.counts.fn == 1);
    CHECK(r.scores.precision == 0.5);
    CHECK(r.scores.recall == 0.5);
    CHECK(r.scores.f1 == 0.5);

    const Idx same{10, 50, 90};
    r = match_peaks(same, same, 20);
    CHECK(r.scores.precision == 1.0);
    CHECK(r.scores.recall == 1.0);
    CHECK(r.scores.f1 == 1.0);
    for (const auto& m : r.matches) CHECK(m.temporal_error == 0);

    r = match_peaks(Idx{90, 110}, Idx{100}, 20);
    REQUIRE(r.matches.size() == 1);
    CHECK(r.matches[0].pred_index == 90);
    CHECK(r.false_positives == Idx{110});
}

TEST_CASE("0/0 convention") {
    const auto empty = match_peaks(Idx{}, Idx{}, 20);
    CHECK(empty.scores.precision == 1.0);
    CHECK(empty.scores.recall == 1.0);
    CHECK(empty.scores.f1 == 1.0);

    const auto missed = match_peaks(Idx{}, Idx{100}, 20);
    CHECK(missed.scores.recall == 0.0);
    CHECK(missed.scores.precision == 0.0);
    CHECK(missed.scores.f1 == 0.0);

    const auto spurious = match_peaks(Idx{100}, Idx{}, 20);
    CHECK(spurious.scores.precision == 0.0);
    CHECK(spurious.scores.recall == 0.0);
}

TEST_CASE("matching properties") {
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        Idx gt, pred;
        for (auto n = rng.uniform_int(0, 12); n > 0; --n) gt.push_back(rng.uniform_int(0, 1000));
        for (auto n = rng.uniform_int(0, 12); n > 0; --n) pred.push_back(rng.uniform_int(0, 1000));
        std::sort(gt.begin(), gt.end());
        gt.erase(std::unique(gt.begin(), gt.end()), gt.end());
        std::sort(pred.begin(), pred.end());
        const auto threshold = rng.uniform_int(0, 60);
        const auto r = match_peaks(pred, gt, threshold);

        // Every gt is matched or missed, every prediction matched or spurious.
        CHECK(r.matches.size() + r.false_negatives.size() == gt.size());
        CHECK(r.matches.size() + r.false_positives.size() == pred.size());
        CHECK(r.counts.tp == static_cast<std::int64_t>(r.matches.size()));
        Idx used_gt, used_pred;
        for (const auto& m : r.matches) {
            CHECK(std::llabs(m.temporal_error) <= threshold);
            CHECK(m.temporal_error == m.pred_index - m.gt_index);
            used_gt.push_back(m.gt_index);
            used_pred.push_back(m.pred_index);
        }
        std::sort(used_gt.begin(), used_gt.end());
        CHECK(std::adjacent_find(used_gt.begin(), used_gt.end()) == used_gt.end());

        // A smaller threshold never finds more.
        if (threshold > 0) CHECK(match_peaks(pred, gt, threshold - 1).counts.tp <= r.counts.tp);

        // Swapping FP and FN swaps precision and recall; F1 is unchanged.
        const auto s = score({r.counts.tp, r.counts.fn, r.counts.fp});
        CHECK(s.precision == doctest::Approx(r.scores.recall));
        CHECK(s.recall == doctest::Approx(r.scores.precision));
        CHECK(s.f1 == doctest::Approx(r.scores.f1));
    }
}

TEST_CASE("spatial metrics") {
    auto r = match_peaks(Idx{100, 202}, Idx{100, 200}, 20);
    const std::vector<double> v{30.0, 30.0};
    apply_spatial_metrics(r, v, 600.0);
    CHECK(r.matches[0].spatial_error == 0.0);
    CHECK(std::abs(r.matches[1].spatial_error - 0.10) < 1e-12);
    CHECK(r.mean_abs_spatial_error == doctest::Approx(0.05));

    const std::vector<double> fast{60.0};
    CHECK(spatial_thresholds(0.20, fast, 600.0) == Idx{2});

    // Per-axle thresholds: 0.2 m is 2 samples at 60 m/s but 12 at 10 m/s.
    const std::vector<double> mixed{60.0, 10.0};
    const auto sp = match_peaks_spatial(Idx{105, 305}, Idx{100, 300}, mixed, 0.20, 600.0);
    CHECK(sp.counts.tp == 1);
    CHECK(sp.matches[0].gt_index == 300);
    CHECK(sp.unit == ThresholdUnit::Metres);

    CHECK_THROWS_AS(apply_spatial_metrics(r, std::vector<double>{30.0}, 600.0), Error);
}

TEST_CASE("aggregate") {
    std::vector<KeyedReport> one{{"a", 0, match_peaks(Idx{105, 400}, Idx{100, 200}, 20)}};
    const auto g = aggregate(one, GroupBy::Global);
    CHECK(g.pooled.scores.precision == one[0].report.scores.precision);
    CHECK(g.pooled.scores.recall == one[0].report.scores.recall);

    std::vector<KeyedReport> two{{"a", 0, match_peaks(Idx{10}, Idx{10}, 20)},
                                 {"b", 1, match_peaks(Idx{500}, Idx{10}, 20)}};
    const auto pooled = aggregate(two, GroupBy::Global);
    CHECK(pooled.pooled.counts.tp == 1);
    CHECK(pooled.pooled.counts.fp == 1);
    CHECK(pooled.pooled.counts.fn == 1);
    CHECK(pooled.pooled.scores.precision == 0.5);
    CHECK(pooled.pooled.scores.recall == 0.5);

    const auto by_sensor = aggregate(two, GroupBy::PerSensor);
    CHECK(by_sensor.groups.size() == 2);

    CHECK_THROWS_AS(aggregate(std::vector<KeyedReport>{}, GroupBy::Global), Error);

    // Quantiles do not depend on report order.
    Rng rng(4);
    std::vector<KeyedReport> many;
    for (int i = 0; i < 30; ++i) {
        Idx gt{100, 300}, pred;
        if (rng.uniform() < 0.7) pred.push_back(100 + rng.uniform_int(-30, 30));
        if (rng.uniform() < 0.5) pred.push_back(300);
        many.push_back({"p" + std::to_string(i), static_cast<int>(i % 2), match_peaks(pred, gt, 20)});
    }
    const auto before = aggregate(many, GroupBy::PerPassage);
    rng.shuffle(std::span<KeyedReport>(many));
    const auto after = aggregate(many, GroupBy::PerPassage);
    CHECK(before.precision.q25 == after.precision.q25);
    CHECK(before.recall.q25 == after.recall.q25);
    CHECK(before.f1.median == after.f1.median);
}

TEST_CASE("quantile") {
    CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({7}, 0.25) == 7.0);
}
