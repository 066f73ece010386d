#include "axle/config.hpp"

#include "axle/error.hpp"
#include "axle/io.hpp"
#include "json_convert.hpp"

namespace axle {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using json_detail::read;
using json_detail::reject_unknown;
using json_detail::require_object;

}  // namespace

void RunConfig::validate() const {
    if (workers < 1) throw Error(ErrorKind::Config, "workers must be >= 1");
    if (synth.n_passages < 0) throw Error(ErrorKind::Config, "synth.n_passages must be >= 0");
    const auto& d = synth.dataset;
    if (d.min_axles < 1 || d.max_axles < d.min_axles)
        throw Error(ErrorKind::Config, "synth axle counts must satisfy 1 <= min_axles <= max_axles");
    if (!(d.min_velocity > 0.0) || d.max_velocity < d.min_velocity)
        throw Error(ErrorKind::Config, "synth velocities must satisfy 0 < min_velocity <= max_velocity");
    if (!(d.min_axle_load >= 0.0) || d.max_axle_load < d.min_axle_load)
        throw Error(ErrorKind::Config, "synth axle loads must satisfy 0 <= min_axle_load <= max_axle_load");
    if (d.noise_relative < 0.0) throw Error(ErrorKind::Config, "synth.noise_relative must be >= 0");
    if (d.sensor_positions.empty()) throw Error(ErrorKind::Config, "synth.sensor_positions must not be empty");
    if (!(ingest.min_height_fraction > 0.0 && ingest.min_height_fraction <= 1.0))
        throw Error(ErrorKind::Config, "ingest.min_height_fraction must be in (0, 1]");
    if (ingest.min_distance < 1) throw Error(ErrorKind::Config, "ingest.min_distance must be >= 1");
    for (const auto& w : wavelets) w.validate();
    model.validate();
    for (const auto& w : wavelets) {
        if (w.n_scales != model.input_scales)
            throw Error(ErrorKind::Config, "every wavelet setting needs model.input_scales (" +
                                               std::to_string(model.input_scales) + ") scales");
    }
    if (model.input_channels != static_cast<int>(wavelets.size()))
        throw Error(ErrorKind::Config, "model.input_channels must equal the number of wavelet settings (6)");
    train.validate();
    evaluate.peaks.validate();
    for (auto t : evaluate.thresholds_samples) {
        if (t < 0) throw Error(ErrorKind::Config, "evaluate.thresholds_samples must be >= 0");
    }
    for (auto t : evaluate.thresholds_m) {
        if (!(t > 0.0)) throw Error(ErrorKind::Config, "evaluate.thresholds_m must be > 0");
    }
    if (evaluate.split != "test" && evaluate.split != "val" && evaluate.split != "train" && evaluate.split != "all")
        throw Error(ErrorKind::Config, "evaluate.split must be one of test, val, train, all");
    for (double g : sweep_gammas) {
        if (!(g >= 0.0)) throw Error(ErrorKind::Config, "sweep_gammas must be >= 0");
    }
}

RunConfig parse_run_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, "malformed config: " + std::string(e.what()));
    }
    require_object(j, "<root>");
    // A run manifest embeds the config it ran with.
    if (j.contains("manifest_version")) {
        if (!j.contains("config")) throw Error(ErrorKind::Config, "manifest has no 'config' section");
        j = json(j["config"]);
        require_object(j, "config");
    }
    reject_unknown(j, "<root>",
                   {"seed", "deterministic", "workers", "data_dir", "out_dir", "synth", "ingest", "wavelets", "model",
                    "train", "evaluate", "sweep_gammas"});
    RunConfig c;
    read(j, "<root>", "seed", c.seed);
    read(j, "<root>", "deterministic", c.deterministic);
    read(j, "<root>", "workers", c.workers);
    read(j, "<root>", "data_dir", c.data_dir);
    read(j, "<root>", "out_dir", c.out_dir);
    read(j, "<root>", "sweep_gammas", c.sweep_gammas);

    if (const auto it = j.find("synth"); it != j.end()) {
        require_object(*it, "synth");
        json rest = *it;
        read(rest, "synth", "n_passages", c.synth.n_passages);
        rest.erase("n_passages");
        c.synth.dataset = rest.get<synth::DatasetSpec>();
    }
    if (const auto it = j.find("ingest"); it != j.end()) {
        require_object(*it, "ingest");
        reject_unknown(*it, "ingest", {"min_height_fraction", "min_distance"});
        read(*it, "ingest", "min_height_fraction", c.ingest.min_height_fraction);
        read(*it, "ingest", "min_distance", c.ingest.min_distance);
    }
    if (const auto it = j.find("wavelets"); it != j.end()) {
        if (!it->is_array() || it->size() != c.wavelets.size())
            throw Error(ErrorKind::Config, "wavelets must be an array of exactly 6 settings");
        for (std::size_t i = 0; i < c.wavelets.size(); ++i) c.wavelets[i] = (*it)[i].get<scalogram::WaveletSpec>();
    }
    if (const auto it = j.find("model"); it != j.end()) c.model = it->get<detector::ModelConfig>();
    if (const auto it = j.find("train"); it != j.end()) c.train = it->get<detector::TrainConfig>();
    if (const auto it = j.find("evaluate"); it != j.end()) {
        require_object(*it, "evaluate");
        reject_unknown(*it, "evaluate", {"peaks", "thresholds_samples", "thresholds_m", "split"});
        if (const auto p = it->find("peaks"); p != it->end()) c.evaluate.peaks = p->get<PeakParams>();
        read(*it, "evaluate", "thresholds_samples", c.evaluate.thresholds_samples);
        read(*it, "evaluate", "thresholds_m", c.evaluate.thresholds_m);
        read(*it, "evaluate", "split", c.evaluate.split);
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(io::read_file(path)); }

std::string dump_run_config(const RunConfig& c) {
    json synth = c.synth.dataset;
    synth["n_passages"] = c.synth.n_passages;
    const json j = {{"seed", c.seed},
                    {"deterministic", c.deterministic},
                    {"workers", c.workers},
                    {"data_dir", c.data_dir},
                    {"out_dir", c.out_dir},
                    {"synth", synth},
                    {"ingest",
                     {{"min_height_fraction", c.ingest.min_height_fraction}, {"min_distance", c.ingest.min_distance}}},
                    {"wavelets", c.wavelets},
                    {"model", c.model},
                    {"train", c.train},
                    {"evaluate",
                     {{"peaks", c.evaluate.peaks},
                      {"thresholds_samples", c.evaluate.thresholds_samples},
                      {"thresholds_m", c.evaluate.thresholds_m},
                      {"split", c.evaluate.split}}},
                    {"sweep_gammas", c.sweep_gammas}};
    return j.dump(2) + "\n";
}

}  // namespace axle
