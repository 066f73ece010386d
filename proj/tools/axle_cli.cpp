// axle: command line front end for the axle detection toolkit.
//
//   axle config      --out DIR                  write a config with every default
//   axle synth       --out DIR                  synthetic passages + ground truth
//   axle label       --data DIR --out DIR       ingest, labels, statistics
//   axle transform   --data DIR --out DIR       scalogram cache
//   axle train       --data DIR --out DIR       checkpoint, history
//   axle sweep-gamma --data DIR --out DIR       one training run per gamma
//   axle predict     --data DIR --checkpoint F  predictions.csv
//   axle evaluate    --data DIR --checkpoint F | --predictions F
//
// Every command writes manifest.json into its output directory. Passing that
// manifest back as --config reproduces the run.

#include "axle/config.hpp"
#include "axle/error.hpp"
#include "axle/io.hpp"
#include "axle/pipeline.hpp"
#include "axle/version.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using axle::Error;
using axle::ErrorKind;
using axle::RunConfig;
using nlohmann::ordered_json;

struct GlobalOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool deterministic = false;
    bool quiet = false;
};

struct CommandOptions {
    std::string data_dir;
    std::string checkpoint;
    std::string resume;
    std::string scalograms;
    std::string predictions;
    std::string split;
    std::vector<double> gammas;
};

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

RunConfig resolve_config(const GlobalOptions& g, const CommandOptions& c) {
    RunConfig cfg = g.config_path.empty() ? RunConfig{} : axle::load_run_config(g.config_path);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.train.seed = *g.seed;
    }
    if (g.workers) cfg.workers = *g.workers;
    if (g.deterministic) cfg.deterministic = true;
    cfg.train.deterministic = cfg.deterministic;
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    if (!c.data_dir.empty()) cfg.data_dir = c.data_dir;
    if (!c.split.empty()) cfg.evaluate.split = c.split;
    cfg.validate();
    return cfg;
}

void require_dir(const std::string& path, const char* what) {
    if (!fs::is_directory(path))
        throw Error(ErrorKind::Io, std::string(what) + " '" + path + "' does not exist or is not a directory");
}

void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path)) throw Error(ErrorKind::Io, std::string(what) + " '" + path + "' not found");
}

void write_manifest(const std::string& command, const RunConfig& cfg, const std::string& fingerprint,
                    const ordered_json& arguments) {
    ordered_json manifest;
    manifest["manifest_version"] = 1;
    manifest["command"] = command;
    manifest["toolkit_version"] = axle::kVersion;
    manifest["seeds"] = {{"seed", cfg.seed}, {"train_seed", cfg.train.seed}, {"split_seed", cfg.train.split_seed}};
    manifest["data_fingerprint"] = fingerprint;
    manifest["arguments"] = arguments;
    manifest["config"] = nlohmann::json::parse(axle::dump_run_config(cfg));
    axle::io::write_file_atomic(fs::path(cfg.out_dir) / "manifest.json", manifest.dump(2) + "\n");
}

std::optional<fs::path> optional_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return fs::path(s);
}

axle::pipeline::Dataset load_dataset(const RunConfig& cfg, const CommandOptions& c, const axle::pipeline::Log& log) {
    require_dir(cfg.data_dir, "data directory");
    return axle::pipeline::build_dataset(cfg, cfg.data_dir, optional_path(c.scalograms), log);
}

// Reads predictions.csv back into per-window peak lists keyed like the
// dataset windows.
std::vector<axle::pipeline::Prediction> read_predictions(const fs::path& path, const axle::pipeline::Dataset& data,
                                                         const std::vector<std::size_t>& indices) {
    std::map<std::pair<std::string, int>, std::vector<std::int64_t>> peaks;
    std::istringstream in(axle::io::read_file(path));
    std::string line;
    std::getline(in, line);
    if (line.rfind("passage_id,sensor,window_start,peak_index", 0) != 0)
        throw Error(ErrorKind::InvalidInput, path.string() + " is not a predictions.csv file");
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ls(line);
        for (std::string col; std::getline(ls, col, ',');) cols.push_back(col);
        if (cols.size() < 4)
            throw Error(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": expected 4+ columns");
        try {
            peaks[{cols[0], std::stoi(cols[1])}].push_back(std::stoll(cols[3]));
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": malformed number");
        }
    }
    std::vector<axle::pipeline::Prediction> out;
    for (auto i : indices) {
        const auto& ex = data.examples[i];
        axle::pipeline::Prediction p;
        p.passage_id = ex.passage_id;
        p.sensor = ex.sensor;
        p.window_start = ex.input.window_start();
        if (auto it = peaks.find({ex.passage_id, ex.sensor}); it != peaks.end()) {
            p.peaks = it->second;
            std::sort(p.peaks.begin(), p.peaks.end());
            for (auto k : p.peaks) {
                if (k < 0 || k >= ex.input.n_samples())
                    throw Error(ErrorKind::InvalidInput, "prediction index " + std::to_string(k) + " outside window " +
                                                             ex.passage_id + "/" + std::to_string(ex.sensor));
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Axle detection from bridge acceleration via wavelet scalograms and a fully convolutional network",
                 "axle"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    app.set_version_flag("--version", std::string(axle::kVersion));

    GlobalOptions g;
    app.add_option("--config", g.config_path, "Run config or manifest.json (JSON)");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--seed", g.seed, "Seed for data generation, weight init and batch sampling");
    app.add_option("--workers", g.workers, "Worker threads across passages and windows")->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", g.deterministic, "Force deterministic mode");
    app.add_flag("-q,--quiet", g.quiet, "Only print errors");

    CommandOptions c;
    auto* config_cmd = app.add_subcommand("config", "Write a config file with every default filled in");
    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic passages with exact ground truth");
    auto* label_cmd = app.add_subcommand("label", "Ingest passages: labels, acceptance statistics, velocity histogram");
    auto* transform_cmd = app.add_subcommand("transform", "Compute and cache the scalogram of every window");
    auto* train_cmd = app.add_subcommand("train", "Train the detector");
    auto* sweep_cmd = app.add_subcommand("sweep-gamma", "Train once per focal loss gamma");
    auto* predict_cmd = app.add_subcommand("predict", "Detect axles with a trained checkpoint");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score detections against the labels");

    for (auto* cmd : {label_cmd, transform_cmd, train_cmd, sweep_cmd, predict_cmd, evaluate_cmd})
        cmd->add_option("--data", c.data_dir, "Passage directory (default: config data_dir)");
    for (auto* cmd : {train_cmd, sweep_cmd, predict_cmd, evaluate_cmd})
        cmd->add_option("--scalograms", c.scalograms, "Scalogram cache directory written by 'transform'");
    for (auto* cmd : {predict_cmd, evaluate_cmd}) {
        cmd->add_option("--checkpoint", c.checkpoint, "Trained model (model.ckpt)");
        cmd->add_option("--split", c.split, "Windows to use: test, val, train or all");
    }
    train_cmd->add_option("--resume", c.resume, "Continue training from this checkpoint");
    sweep_cmd->add_option("--gammas", c.gammas, "Gamma values (default: config sweep_gammas)")->delimiter(',');
    evaluate_cmd->add_option("--predictions", c.predictions, "Score an existing predictions.csv instead of a model");

    CLI11_PARSE(app, argc, argv);

    const RunConfig cfg = resolve_config(g, c);
    const axle::pipeline::Log log = g.quiet ? axle::pipeline::Log{} : axle::pipeline::Log{log_line};
    const fs::path out = cfg.out_dir;

    if (config_cmd->parsed()) {
        axle::io::write_file_atomic(out / "config.json", axle::dump_run_config(cfg));
        if (log) log("wrote " + (out / "config.json").string());
        return 0;
    }

    if (synth_cmd->parsed()) {
        axle::pipeline::run_synth(cfg, out, log);
        std::vector<fs::path> files;
        for (const auto& meta : axle::io::list_passages(out)) {
            files.push_back(meta);
            files.push_back(fs::path(meta).replace_extension(".dat"));
        }
        write_manifest("synth", cfg, axle::io::fingerprint_files(files), ordered_json::object());
        return 0;
    }

    if (label_cmd->parsed()) {
        require_dir(cfg.data_dir, "data directory");
        axle::pipeline::run_label(cfg, cfg.data_dir, out, log);
        std::vector<fs::path> files;
        for (const auto& meta : axle::io::list_passages(cfg.data_dir)) {
            files.push_back(meta);
            files.push_back(fs::path(meta).replace_extension(".dat"));
        }
        write_manifest("label", cfg, axle::io::fingerprint_files(files), ordered_json::object());
        return 0;
    }

    if (transform_cmd->parsed()) {
        require_dir(cfg.data_dir, "data directory");
        axle::pipeline::run_transform(cfg, cfg.data_dir, out, log);
        const auto data = axle::pipeline::build_dataset(cfg, cfg.data_dir, out / "scalograms");
        write_manifest("transform", cfg, data.fingerprint, ordered_json::object());
        return 0;
    }

    if (train_cmd->parsed()) {
        if (!c.resume.empty()) require_file(c.resume, "checkpoint");
        const auto data = load_dataset(cfg, c, log);
        if (data.examples.empty()) throw Error(ErrorKind::InvalidInput, "no accepted passages to train on");
        axle::pipeline::run_train(cfg, data, out, optional_path(c.resume), log);
        write_manifest("train", cfg, data.fingerprint, {{"resume", c.resume}});
        return 0;
    }

    if (sweep_cmd->parsed()) {
        const auto gammas = c.gammas.empty() ? cfg.sweep_gammas : c.gammas;
        const auto data = load_dataset(cfg, c, log);
        if (data.examples.empty()) throw Error(ErrorKind::InvalidInput, "no accepted passages to train on");
        const auto rows = axle::pipeline::run_sweep(cfg, data, gammas, out, log);
        if (log) log(axle::pipeline::sweep_csv(rows));
        write_manifest("sweep-gamma", cfg, data.fingerprint, {{"gammas", gammas}});
        return 0;
    }

    const bool evaluating = evaluate_cmd->parsed();
    if (evaluating && c.checkpoint.empty() == c.predictions.empty())
        throw Error(ErrorKind::Config, "evaluate needs exactly one of --checkpoint or --predictions");
    if (!evaluating && c.checkpoint.empty()) throw Error(ErrorKind::Config, "predict needs --checkpoint");
    if (!c.checkpoint.empty()) require_file(c.checkpoint, "checkpoint");
    if (!c.predictions.empty()) require_file(c.predictions, "predictions file");

    const auto data = load_dataset(cfg, c, log);
    const auto indices = axle::pipeline::select_split(data, cfg.train, cfg.evaluate.split);
    if (indices.empty())
        throw Error(ErrorKind::InvalidInput, "split '" + cfg.evaluate.split + "' holds no windows");

    std::vector<axle::pipeline::Prediction> predictions;
    if (!c.checkpoint.empty()) {
        const auto model = axle::detector::DetectorModel::load(c.checkpoint);
        if (model.config().input_channels != static_cast<int>(cfg.wavelets.size()))
            throw Error(ErrorKind::InvalidInput, "checkpoint expects " + std::to_string(model.config().input_channels) +
                                                     " transforms, config provides " +
                                                     std::to_string(cfg.wavelets.size()));
        predictions = axle::pipeline::predict_windows(model, data, indices, cfg.evaluate.peaks, cfg.workers);
        axle::io::write_file_atomic(out / "predictions.csv", axle::pipeline::predictions_csv(predictions));
    } else {
        predictions = read_predictions(c.predictions, data, indices);
    }

    if (evaluating) {
        const auto outcome = axle::pipeline::evaluate_predictions(cfg, data, indices, predictions);
        axle::pipeline::write_evaluation(outcome, out);
        if (log) {
            for (const auto& s : outcome.summaries) {
                char buf[200];
                std::snprintf(buf, sizeof buf, "threshold %-6s  P %.4f  R %.4f  F1 %.4f  |dt| %.3f samples",
                              s.threshold.c_str(), s.global.scores.precision, s.global.scores.recall,
                              s.global.scores.f1, s.mean_abs_temporal_error);
                log(buf);
            }
        }
    } else if (log) {
        std::size_t n = 0;
        for (const auto& p : predictions) n += p.peaks.size();
        log("predict: " + std::to_string(n) + " axles in " + std::to_string(predictions.size()) + " windows");
    }
    write_manifest(evaluating ? "evaluate" : "predict", cfg, data.fingerprint,
                   {{"checkpoint", c.checkpoint}, {"predictions", c.predictions}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "axle: error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "axle: unexpected error: " << e.what() << '\n';
        return 3;
    }
}
