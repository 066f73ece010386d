#pragma once

// JSON mapping of the configuration structs. Readers start from the current
// (default) values, so missing keys keep their defaults; unknown keys are
// rejected to catch typos.

#include "axle/detector.hpp"
#include "axle/error.hpp"
#include "axle/peaks.hpp"
#include "axle/scalogram.hpp"
#include "axle/synth.hpp"

#include "json.hpp"

#include <initializer_list>
#include <string>
#include <string_view>

namespace axle::json_detail {

using nlohmann::json;

inline void require_object(const json& j, std::string_view section) {
    if (!j.is_object()) throw Error(ErrorKind::Config, "config section '" + std::string(section) + "' must be an object");
}

inline void reject_unknown(const json& j, std::string_view section, std::initializer_list<std::string_view> known) {
    for (const auto& item : j.items()) {
        bool found = false;
        for (auto k : known) found = found || item.key() == k;
        if (!found)
            throw Error(ErrorKind::Config, "unknown key '" + item.key() + "' in config section '" +
                                               std::string(section) + "'");
    }
}

template <typename T>
void read(const json& j, std::string_view section, const char* key, T& out) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config,
                    "bad value for '" + std::string(section) + "." + key + "': " + std::string(e.what()));
    }
}

}  // namespace axle::json_detail

namespace axle {

inline void to_json(nlohmann::json& j, const PeakParams& p) {
    j = {{"min_height", p.min_height}, {"min_distance", p.min_distance}, {"min_prominence", p.min_prominence}};
}

inline void from_json(const nlohmann::json& j, PeakParams& p) {
    using namespace json_detail;
    require_object(j, "peaks");
    reject_unknown(j, "peaks", {"min_height", "min_distance", "min_prominence"});
    read(j, "peaks", "min_height", p.min_height);
    read(j, "peaks", "min_distance", p.min_distance);
    read(j, "peaks", "min_prominence", p.min_prominence);
}

}  // namespace axle

namespace axle::scalogram {

inline void to_json(nlohmann::json& j, const WaveletSpec& s) {
    j = {{"family", std::string(to_string(s.family))},
         {"scale_min", s.scale_min},
         {"scale_max", s.scale_max},
         {"n_scales", s.n_scales}};
}

inline void from_json(const nlohmann::json& j, WaveletSpec& s) {
    using namespace json_detail;
    require_object(j, "wavelets[]");
    reject_unknown(j, "wavelets[]", {"family", "scale_min", "scale_max", "n_scales"});
    std::string family(to_string(s.family));
    read(j, "wavelets[]", "family", family);
    s.family = family_from_string(family);
    read(j, "wavelets[]", "scale_min", s.scale_min);
    read(j, "wavelets[]", "scale_max", s.scale_max);
    read(j, "wavelets[]", "n_scales", s.n_scales);
}

}  // namespace axle::scalogram

namespace axle::synth {

inline void to_json(nlohmann::json& j, const DatasetSpec& s) {
    j = {{"min_axles", s.min_axles},
         {"max_axles", s.max_axles},
         {"min_velocity", s.min_velocity},
         {"max_velocity", s.max_velocity},
         {"min_axle_load", s.min_axle_load},
         {"max_axle_load", s.max_axle_load},
         {"noise_relative", s.noise_relative},
         {"n_modes", s.n_modes},
         {"local_gain", s.local_gain},
         {"sensor_positions", s.sensor_positions}};
}

inline void from_json(const nlohmann::json& j, DatasetSpec& s) {
    using namespace json_detail;
    constexpr std::string_view section = "synth";
    require_object(j, section);
    reject_unknown(j, section,
                   {"min_axles", "max_axles", "min_velocity", "max_velocity", "min_axle_load", "max_axle_load",
                    "noise_relative", "n_modes", "local_gain", "sensor_positions"});
    read(j, section, "min_axles", s.min_axles);
    read(j, section, "max_axles", s.max_axles);
    read(j, section, "min_velocity", s.min_velocity);
    read(j, section, "max_velocity", s.max_velocity);
    read(j, section, "min_axle_load", s.min_axle_load);
    read(j, section, "max_axle_load", s.max_axle_load);
    read(j, section, "noise_relative", s.noise_relative);
    read(j, section, "n_modes", s.n_modes);
    read(j, section, "local_gain", s.local_gain);
    read(j, section, "sensor_positions", s.sensor_positions);
}

}  // namespace axle::synth

namespace axle::detector {

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"depth", c.depth},
         {"base_feature_maps", c.base_feature_maps},
         {"input_channels", c.input_channels},
         {"input_scales", c.input_scales},
         {"kernel_time", c.kernel_time},
         {"kernel_freq", c.kernel_freq},
         {"bn_momentum", c.bn_momentum}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    using namespace json_detail;
    constexpr std::string_view section = "model";
    require_object(j, section);
    reject_unknown(j, section,
                   {"depth", "base_feature_maps", "input_channels", "input_scales", "kernel_time", "kernel_freq",
                    "bn_momentum"});
    read(j, section, "depth", c.depth);
    read(j, section, "base_feature_maps", c.base_feature_maps);
    read(j, section, "input_channels", c.input_channels);
    read(j, section, "input_scales", c.input_scales);
    read(j, section, "kernel_time", c.kernel_time);
    read(j, section, "kernel_freq", c.kernel_freq);
    read(j, section, "bn_momentum", c.bn_momentum);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"gamma", c.gamma},
         {"epochs", c.epochs},
         {"steps_per_epoch", c.steps_per_epoch},
         {"batch_size", c.batch_size},
         {"length_buckets", c.length_buckets},
         {"split", {{"train", c.train_fraction}, {"val", c.val_fraction}, {"test", c.test_fraction}}},
         {"split_seed", c.split_seed},
         {"seed", c.seed},
         {"learning_rate", c.learning_rate},
         {"adam_beta1", c.adam_beta1},
         {"adam_beta2", c.adam_beta2},
         {"adam_epsilon", c.adam_epsilon},
         {"deterministic", c.deterministic},
         {"checkpoint_policy", "keep-best-by-F1"},
         {"peaks", c.peaks},
         {"match_threshold", c.match_threshold},
         {"stop_at_val_f1", c.stop_at_val_f1}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    using namespace json_detail;
    constexpr std::string_view section = "train";
    require_object(j, section);
    reject_unknown(j, section,
                   {"gamma", "epochs", "steps_per_epoch", "batch_size", "length_buckets", "split", "split_seed", "seed",
                    "learning_rate", "adam_beta1", "adam_beta2", "adam_epsilon", "deterministic",
                    "checkpoint_policy", "peaks", "match_threshold", "stop_at_val_f1"});
    read(j, section, "gamma", c.gamma);
    read(j, section, "epochs", c.epochs);
    read(j, section, "steps_per_epoch", c.steps_per_epoch);
    read(j, section, "batch_size", c.batch_size);
    read(j, section, "length_buckets", c.length_buckets);
    if (const auto it = j.find("split"); it != j.end()) {
        require_object(*it, "train.split");
        reject_unknown(*it, "train.split", {"train", "val", "test"});
        read(*it, "train.split", "train", c.train_fraction);
        read(*it, "train.split", "val", c.val_fraction);
        read(*it, "train.split", "test", c.test_fraction);
    }
    read(j, section, "split_seed", c.split_seed);
    read(j, section, "seed", c.seed);
    read(j, section, "learning_rate", c.learning_rate);
    read(j, section, "adam_beta1", c.adam_beta1);
    read(j, section, "adam_beta2", c.adam_beta2);
    read(j, section, "adam_epsilon", c.adam_epsilon);
    read(j, section, "deterministic", c.deterministic);
    std::string policy = "keep-best-by-F1";
    read(j, section, "checkpoint_policy", policy);
    if (policy != "keep-best-by-F1")
        throw Error(ErrorKind::Config, "train.checkpoint_policy: only 'keep-best-by-F1' is supported");
    if (const auto it = j.find("peaks"); it != j.end()) c.peaks = it->get<PeakParams>();
    read(j, section, "match_threshold", c.match_threshold);
    read(j, section, "stop_at_val_f1", c.stop_at_val_f1);
}

}  // namespace axle::detector
