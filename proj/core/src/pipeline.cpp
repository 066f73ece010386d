#include "axle/pipeline.hpp"

#include "axle/error.hpp"
#include "axle/synth.hpp"
#include "axle/version.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

namespace axle::pipeline {

namespace {

using nlohmann::ordered_json;

void say(const Log& log, const std::string& msg) {
    if (log) log(msg);
}

std::string threshold_label_m(double metres) { return io::format_number(metres) + "m"; }

std::vector<std::int64_t> ground_truth(const detector::Example& ex) {
    std::vector<std::int64_t> gt;
    for (std::size_t i = 0; i < ex.target.size(); ++i) {
        if (ex.target[i] != 0) gt.push_back(static_cast<std::int64_t>(i));
    }
    return gt;
}

ordered_json distribution_json(const postprocess::AggregateSummary& a) {
    return {{"groups", a.groups.size()},
            {"precision_q25", a.precision.q25},
            {"precision_median", a.precision.median},
            {"recall_q25", a.recall.q25},
            {"recall_median", a.recall.median},
            {"f1_q25", a.f1.q25},
            {"f1_median", a.f1.median}};
}

}  // namespace

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const auto threads = static_cast<std::size_t>(std::max(1, workers));
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// ---------------------------------------------------------------- synth

SynthSummary run_synth(const RunConfig& cfg, const fs::path& dir, const Log& log) {
    if (cfg.synth.n_passages <= 0) throw Error(ErrorKind::Config, "empty dataset requested (synth.n_passages = 0)");
    const auto n = static_cast<std::size_t>(cfg.synth.n_passages);
    std::vector<std::int64_t> axles(n, 0);
    parallel_for(n, cfg.workers, [&](std::size_t i) {
        const auto scenario = synth::random_scenario(cfg.synth.dataset, cfg.seed, static_cast<std::int64_t>(i));
        const auto [passage, labels] = synth::simulate_passage(scenario);
        io::write_passage(passage, dir);
        io::write_labels(dir / (passage.id + ".truth.json"), passage.id, labels, passage.n_samples());
        axles[i] = labels.n_axles();
    });
    SynthSummary s;
    s.passages = static_cast<std::int64_t>(n);
    for (auto a : axles) s.axles += a;
    say(log, "synth: wrote " + std::to_string(s.passages) + " passages (" + std::to_string(s.axles) + " axles) to " +
                 dir.string());
    return s;
}

// ---------------------------------------------------------------- label

std::string velocity_histogram_csv(const std::vector<double>& velocities, double bin_width) {
    std::map<std::int64_t, std::int64_t> bins;
    for (double v : velocities) ++bins[static_cast<std::int64_t>(std::floor(v / bin_width))];
    std::string out = "bin_low,bin_high,count\n";
    for (const auto& [bin, count] : bins) {
        out += io::format_number(static_cast<double>(bin) * bin_width) + "," +
               io::format_number(static_cast<double>(bin + 1) * bin_width) + "," + std::to_string(count) + "\n";
    }
    return out;
}

LabelSummary run_label(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir, const Log& log) {
    const auto files = io::list_passages(data_dir);
    if (files.empty()) throw Error(ErrorKind::Io, "no passages (*.meta) found in " + data_dir.string());
    std::vector<ingest::IngestResult> results(files.size());
    std::vector<std::string> ids(files.size());
    parallel_for(files.size(), cfg.workers, [&](std::size_t i) {
        const auto passage = io::read_passage(files[i]);
        ids[i] = passage.id;
        results[i] = ingest::label_passage(passage, ingest::IngestParams{cfg.ingest});
        if (results[i].verdict == ingest::Verdict::Accepted)
            io::write_labels(out_dir / "labels" / (passage.id + ".json"), passage.id, results[i].labels,
                             passage.n_samples());
    });

    LabelSummary summary;
    for (std::size_t i = 0; i < files.size(); ++i) {
        ++summary.stats.total;
        if (results[i].verdict == ingest::Verdict::Accepted) {
            ++summary.stats.accepted;
            const auto& v = results[i].labels.axle_velocities;
            summary.velocities.insert(summary.velocities.end(), v.begin(), v.end());
        } else {
            ++summary.stats.rejected;
            summary.rejected.push_back(ids[i] + ": " + results[i].reason);
        }
    }
    const ordered_json stats = {{"total", summary.stats.total},
                                {"accepted", summary.stats.accepted},
                                {"rejected", summary.stats.rejected},
                                {"accepted_ratio", summary.stats.accepted_ratio()},
                                {"accepted_axles", summary.velocities.size()},
                                {"rejected_passages", summary.rejected}};
    io::write_file_atomic(out_dir / "ingest_stats.json", stats.dump(2) + "\n");
    io::write_file_atomic(out_dir / "velocity_histogram.csv", velocity_histogram_csv(summary.velocities));
    say(log, "label: " + std::to_string(summary.stats.accepted) + " accepted, " +
                 std::to_string(summary.stats.rejected) + " rejected of " + std::to_string(summary.stats.total));
    return summary;
}

// ---------------------------------------------------------------- dataset

Dataset build_dataset(const RunConfig& cfg, const fs::path& data_dir, const std::optional<fs::path>& cache_dir,
                      const Log& log) {
    const auto files = io::list_passages(data_dir);
    if (files.empty()) throw Error(ErrorKind::Io, "no passages (*.meta) found in " + data_dir.string());

    struct PassageWindows {
        bool accepted = false;
        std::vector<detector::Example> examples;
        std::vector<double> velocities;
        double sample_rate = 0.0;
        fs::path data_file;
    };
    std::vector<PassageWindows> per_passage(files.size());
    parallel_for(files.size(), cfg.workers, [&](std::size_t i) {
        auto& out = per_passage[i];
        const auto passage = io::read_passage(files[i]);
        auto data_file = files[i];
        out.data_file = data_file.replace_extension(".dat");
        const auto result = ingest::label_passage(passage, ingest::IngestParams{cfg.ingest});
        if (result.verdict != ingest::Verdict::Accepted) return;
        out.accepted = true;
        out.velocities = result.labels.axle_velocities;
        out.sample_rate = passage.sample_rate;
        for (int s = 0; s < static_cast<int>(passage.n_sensors()); ++s) {
            detector::Example ex;
            ex.passage_id = passage.id;
            ex.sensor = s;
            const auto cache_file =
                cache_dir ? *cache_dir / (passage.id + "_s" + std::to_string(s) + ".bin") : fs::path();
            if (cache_dir && fs::exists(cache_file)) {
                ex.input = io::read_scalogram(cache_file);
                ex.target.resize(static_cast<std::size_t>(ex.input.n_samples()));
                if (ex.input.window_start() < 0 || ex.input.window_start() + ex.input.n_samples() > passage.n_samples())
                    throw Error(ErrorKind::InvalidInput, cache_file.string() + " does not fit passage " + passage.id);
                for (std::int64_t t = 0; t < ex.input.n_samples(); ++t)
                    ex.target[static_cast<std::size_t>(t)] = result.labels.targets(ex.input.window_start() + t, s);
            } else {
                auto w = scalogram::transform_passage(passage, result.labels, s, cfg.wavelets);
                ex.input = std::move(w.scalogram);
                ex.target = std::move(w.target);
                if (cache_dir) io::write_scalogram(cache_file, ex.input);
            }
            out.examples.push_back(std::move(ex));
        }
    });

    Dataset data;
    std::vector<fs::path> fingerprinted;
    for (std::size_t i = 0; i < files.size(); ++i) {
        auto& p = per_passage[i];
        fingerprinted.push_back(files[i]);
        fingerprinted.push_back(p.data_file);
        ++data.stats.total;
        if (!p.accepted) {
            ++data.stats.rejected;
            continue;
        }
        ++data.stats.accepted;
        for (auto& ex : p.examples) {
            data.examples.push_back(std::move(ex));
            data.velocities.push_back(p.velocities);
            data.sample_rates.push_back(p.sample_rate);
        }
    }
    data.fingerprint = io::fingerprint_files(fingerprinted);
    say(log, "dataset: " + std::to_string(data.examples.size()) + " windows from " +
                 std::to_string(data.stats.accepted) + " accepted passages (" + std::to_string(data.stats.rejected) +
                 " rejected)");
    return data;
}

void run_transform(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir, const Log& log) {
    const auto cache = out_dir / "scalograms";
    const auto data = build_dataset(cfg, data_dir, cache, log);
    if (data.examples.empty()) throw Error(ErrorKind::InvalidInput, "no accepted passages to transform");
    const auto& s = data.examples.front().input;
    std::string csv = "time,scale,transform,value\n";
    for (std::int64_t t = 0; t < s.n_samples(); ++t) {
        for (int f = 0; f < s.n_scales(); ++f) {
            for (int k = 0; k < s.n_transforms(); ++k) {
                csv += std::to_string(t) + "," + std::to_string(f) + "," + std::to_string(k) + "," +
                       io::format_number(s.at(t, f, k)) + "\n";
            }
        }
    }
    io::write_file_atomic(out_dir / "scalogram_example.csv", csv);
    say(log, "transform: cached " + std::to_string(data.examples.size()) + " scalograms in " + cache.string());
}

std::vector<std::size_t> select_split(const Dataset& data, const detector::TrainConfig& train,
                                      const std::string& split) {
    std::vector<std::size_t> out;
    if (split == "all") {
        for (std::size_t i = 0; i < data.examples.size(); ++i) out.push_back(i);
        return out;
    }
    const auto want = split == "train" ? detector::Split::Train
                      : split == "val" ? detector::Split::Validation
                      : split == "test" ? detector::Split::Test
                                        : throw Error(ErrorKind::Config, "unknown split '" + split + "'");
    const auto splits = detector::split_examples(data.examples, train);
    for (std::size_t i = 0; i < splits.size(); ++i) {
        if (splits[i] == want) out.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------- train

TrainOutcome run_train(const RunConfig& cfg, const Dataset& data, const fs::path& out_dir,
                       const std::optional<fs::path>& resume_from, const Log& log) {
    detector::DetectorModel model = resume_from ? detector::DetectorModel::load(*resume_from)
                                                : detector::DetectorModel(cfg.model, cfg.train.seed);
    if (resume_from) say(log, "resuming from epoch " + std::to_string(model.manifest.epochs_completed));
    model.manifest.data_fingerprint = data.fingerprint;

    auto result = detector::train(model, data.examples, cfg.train, [&](const detector::EpochRecord& r) {
        say(log, "epoch " + std::to_string(r.epoch) + "  loss " + io::format_number(r.loss) + "  val P " +
                     io::format_number(r.val_precision) + " R " + io::format_number(r.val_recall) + " F1 " +
                     io::format_number(r.val_f1));
    });

    TrainOutcome out;
    out.checkpoint = out_dir / "model.ckpt";
    fs::create_directories(out_dir);
    model.save(out.checkpoint);

    std::string history = io::history_csv(result.history);
    const auto history_path = out_dir / "history.csv";
    if (resume_from && fs::exists(history_path)) {
        // Keep earlier epochs; drop the header of the new block.
        history = io::read_file(history_path) + history.substr(history.find('\n') + 1);
    }
    io::write_file_atomic(history_path, history);

    const ordered_json summary = {{"gamma", cfg.train.gamma},
                                  {"best_epoch", result.best_epoch},
                                  {"best_val_precision", result.best.val_precision},
                                  {"best_val_recall", result.best.val_recall},
                                  {"best_val_f1", result.best.val_f1},
                                  {"collapsed", result.collapsed},
                                  {"status", result.collapsed ? "unusable" : "ok"},
                                  {"epochs_completed", model.manifest.epochs_completed},
                                  {"optimizer_steps", model.manifest.optimizer_steps},
                                  {"parameter_count", model.parameter_count()}};
    io::write_file_atomic(out_dir / "train_summary.json", summary.dump(2) + "\n");
    if (result.collapsed) say(log, "warning: no validation peak was ever detected; the run is unusable");
    out.result = std::move(result);
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "gamma,best_epoch,f1,precision,recall,status\n";
    for (const auto& r : rows) {
        out += io::format_number(r.gamma) + "," + std::to_string(r.best_epoch) + "," + io::format_number(r.f1) + "," +
               io::format_number(r.precision) + "," + io::format_number(r.recall) + "," +
               (r.unusable ? "unusable" : "ok") + "\n";
    }
    return out;
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg, const Dataset& data, const std::vector<double>& gammas,
                                const fs::path& out_dir, const Log& log) {
    if (gammas.empty()) throw Error(ErrorKind::Config, "no gamma values to sweep");
    std::vector<SweepRow> rows;
    for (double g : gammas) {
        if (!(g >= 0.0)) throw Error(ErrorKind::Config, "gamma must be >= 0");
        RunConfig run = cfg;
        run.train.gamma = g;
        say(log, "sweep: gamma " + io::format_number(g));
        const auto outcome = run_train(run, data, out_dir / ("gamma_" + io::format_number(g)), {}, log);
        const auto& r = outcome.result;
        rows.push_back({g, r.best_epoch, r.best.val_f1, r.best.val_precision, r.best.val_recall, r.collapsed});
        io::write_file_atomic(out_dir / "sweep.csv", sweep_csv(rows));
    }
    return rows;
}

// ---------------------------------------------------------------- predict / evaluate

std::vector<Prediction> predict_windows(const detector::DetectorModel& model, const Dataset& data,
                                        const std::vector<std::size_t>& indices, const PeakParams& peaks,
                                        int workers) {
    std::vector<Prediction> out(indices.size());
    parallel_for(indices.size(), workers, [&](std::size_t i) {
        const auto& ex = data.examples[indices[i]];
        auto& p = out[i];
        p.passage_id = ex.passage_id;
        p.sensor = ex.sensor;
        p.window_start = ex.input.window_start();
        p.probabilities = model.predict(ex.input);
        p.peaks = find_peaks(p.probabilities, peaks);
    });
    return out;
}

std::string predictions_csv(const std::vector<Prediction>& predictions) {
    std::string out = "passage_id,sensor,window_start,peak_index,recording_index,probability\n";
    for (const auto& p : predictions) {
        for (auto k : p.peaks) {
            out += p.passage_id + "," + std::to_string(p.sensor) + "," + std::to_string(p.window_start) + "," +
                   std::to_string(k) + "," + std::to_string(p.window_start + k) + "," +
                   io::format_number(p.probabilities[static_cast<std::size_t>(k)]) + "\n";
        }
    }
    return out;
}

EvaluationOutcome evaluate_predictions(const RunConfig& cfg, const Dataset& data,
                                       const std::vector<std::size_t>& indices,
                                       const std::vector<Prediction>& predictions) {
    if (indices.size() != predictions.size())
        throw Error(ErrorKind::InvalidInput, "one prediction per evaluated window required");
    if (indices.empty()) throw Error(ErrorKind::InvalidInput, "nothing to evaluate (empty split)");

    struct Threshold {
        std::string label;
        bool metres = false;
        double value = 0.0;
    };
    std::vector<Threshold> thresholds;
    for (auto t : cfg.evaluate.thresholds_samples) thresholds.push_back({std::to_string(t), false, static_cast<double>(t)});
    for (auto t : cfg.evaluate.thresholds_m) thresholds.push_back({threshold_label_m(t), true, t});

    EvaluationOutcome outcome;
    for (const auto& th : thresholds) {
        std::vector<postprocess::KeyedReport> keyed;
        std::vector<double> temporal;
        std::vector<double> spatial;
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto& ex = data.examples[indices[i]];
            const auto& vel = data.velocities[indices[i]];
            const double fs = data.sample_rates[indices[i]];
            const auto gt = ground_truth(ex);
            auto report = th.metres
                              ? postprocess::match_peaks_spatial(predictions[i].peaks, gt, vel, th.value, fs)
                              : postprocess::match_peaks(predictions[i].peaks, gt, static_cast<std::int64_t>(th.value));
            if (!th.metres) postprocess::apply_spatial_metrics(report, vel, fs);
            for (const auto& m : report.matches) {
                temporal.push_back(static_cast<double>(m.temporal_error));
                spatial.push_back(std::abs(m.spatial_error));
            }
            outcome.rows.push_back({ex.passage_id, ex.sensor, th.label, report});
            keyed.push_back({ex.passage_id, ex.sensor, std::move(report)});
        }
        ThresholdSummary s;
        s.threshold = th.label;
        s.per_passage = postprocess::aggregate(keyed, postprocess::GroupBy::PerPassage);
        s.per_sensor = postprocess::aggregate(keyed, postprocess::GroupBy::PerSensor);
        s.global = s.per_passage.pooled;
        if (!temporal.empty()) {
            double abs_sum = 0.0;
            double sum = 0.0;
            for (double t : temporal) {
                abs_sum += std::abs(t);
                sum += t;
            }
            const double n = static_cast<double>(temporal.size());
            double sq = 0.0;
            for (double t : temporal) sq += (t - sum / n) * (t - sum / n);
            s.mean_abs_temporal_error = abs_sum / n;
            s.std_temporal_error = std::sqrt(sq / n);
            double spatial_sum = 0.0;
            for (double d : spatial) spatial_sum += d;
            s.mean_abs_spatial_error = spatial_sum / n;
        }
        outcome.summaries.push_back(std::move(s));
    }
    return outcome;
}

void write_evaluation(const EvaluationOutcome& outcome, const fs::path& out_dir) {
    io::write_file_atomic(out_dir / "report.csv", io::report_csv(outcome.rows));
    io::write_file_atomic(out_dir / "deviations.csv", io::deviations_csv(outcome.rows));

    std::string dist = "group_by,group,threshold,tp,fp,fn,precision,recall,f1\n";
    ordered_json thresholds = ordered_json::array();
    for (const auto& s : outcome.summaries) {
        for (const auto* a : {&s.per_passage, &s.per_sensor}) {
            const char* by = a == &s.per_passage ? "passage_sensor" : "sensor";
            for (const auto& g : a->groups) {
                dist += std::string(by) + "," + g.group + "," + s.threshold + "," + std::to_string(g.counts.tp) + "," +
                        std::to_string(g.counts.fp) + "," + std::to_string(g.counts.fn) + "," +
                        io::format_number(g.scores.precision) + "," + io::format_number(g.scores.recall) + "," +
                        io::format_number(g.scores.f1) + "\n";
            }
        }
        thresholds.push_back({{"threshold", s.threshold},
                              {"tp", s.global.counts.tp},
                              {"fp", s.global.counts.fp},
                              {"fn", s.global.counts.fn},
                              {"precision", s.global.scores.precision},
                              {"recall", s.global.scores.recall},
                              {"f1", s.global.scores.f1},
                              {"mean_abs_temporal_error", s.mean_abs_temporal_error},
                              {"std_temporal_error", s.std_temporal_error},
                              {"mean_abs_spatial_error", s.mean_abs_spatial_error},
                              {"per_passage_sensor", distribution_json(s.per_passage)},
                              {"per_sensor", distribution_json(s.per_sensor)}});
    }
    io::write_file_atomic(out_dir / "distributions.csv", dist);
    const ordered_json summary = {
        {"toolkit_version", kVersion},
        {"conventions",
         "precision/recall/F1 are 1 for a window with no ground-truth axles and no detections, 0 for any other empty "
         "denominator; temporal errors are predicted minus true sample; thresholds without a unit are samples"},
        {"thresholds", thresholds}};
    io::write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace axle::pipeline
