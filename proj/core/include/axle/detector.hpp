#pragma once

#include "axle/peaks.hpp"
#include "axle/scalogram.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace axle::nn {
class Network;
}

namespace axle::detector {

struct ModelConfig {
    int depth = 4;               // pooling steps
    int base_feature_maps = 16;  // doubled per level
    int input_channels = 6;      // wavelet transforms
    int input_scales = 16;       // scales per transform
    int kernel_time = 3;
    int kernel_freq = 3;
    double bn_momentum = 0.99;

    /// input_scales must equal 2^depth so the frequency axis collapses to 1.
    void validate() const;
    [[nodiscard]] std::int64_t time_multiple() const { return std::int64_t{1} << depth; }
};

struct TrainConfig {
    double gamma = 2.5;
    int epochs = 150;
    int steps_per_epoch = 150;
    int batch_size = 16;
    int length_buckets = 4;  // batches are formed from batch_size * length_buckets windows sorted by length; 1 = plain random batches
    double train_fraction = 0.70;
    double val_fraction = 0.20;    // 0: validate on the training split
    double test_fraction = 0.10;
    std::uint64_t split_seed = 0;
    std::uint64_t seed = 0;  // weight init and batch sampling
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-7;
    bool deterministic = true;
    PeakParams peaks;                    // validation peak extraction
    std::int64_t match_threshold = 20;   // samples, validation matching
    double stop_at_val_f1 = 0.0;         // > 0: stop once validation F1 reaches it

    void validate() const;
};

inline constexpr double kProbabilityEpsilon = 1e-7;

/// Mean focal loss -(1 - p_t)^gamma ln(p_t) with p_t = p for y = 1 and
/// 1 - p otherwise; p is clamped to [eps, 1 - eps].
double focal_loss(std::span<const double> p, std::span<const std::uint8_t> y, double gamma);

/// Per-sample focal loss and its derivative with respect to p (zero where the
/// clamp is active).
double focal_loss_term(double p, std::uint8_t y, double gamma);
double focal_loss_derivative(double p, std::uint8_t y, double gamma);

/// Mean binary cross-entropy with the same clamping.
double binary_cross_entropy(std::span<const double> p, std::span<const std::uint8_t> y);

struct PaddedScalogram {
    scalogram::Scalogram tensor;
    std::int64_t original_length = 0;
};

/// Appends zero time steps up to the next multiple of `multiple`.
PaddedScalogram pad_to_multiple(const scalogram::Scalogram& input, std::int64_t multiple);
inline PaddedScalogram pad_to_multiple_of_16(const scalogram::Scalogram& input) { return pad_to_multiple(input, 16); }

/// Everything needed to reproduce a trained model.
struct TrainingManifest {
    TrainConfig train;
    std::string data_fingerprint;
    int epochs_completed = 0;
    std::int64_t optimizer_steps = 0;
    std::string toolkit_version;
};

/// Shapes seen by the most recent forward pass.
struct ForwardShapes {
    std::int64_t padded_time = 0;
    std::int64_t bottleneck_time = 0;
    int bottleneck_freq = 0;
    int bottleneck_channels = 0;
};

/// The fully convolutional per-sample classifier.
///
/// Encoder: `depth` levels of (conv block, residual block, 2x2 max pool),
/// feature maps doubling from base_feature_maps. Bottleneck: conv block +
/// residual block. Decoder: per level a (3 x 1) stride-2 transposed
/// convolution over time, concatenated with the matching encoder output whose
/// frequency axis is folded into channels and projected by a 1x1 convolution,
/// followed by a conv block and a residual block. Head: one k x k
/// convolution with a sigmoid.
class DetectorModel {
public:
    explicit DetectorModel(const ModelConfig& config, std::uint64_t init_seed = 0);
    ~DetectorModel();
    DetectorModel(DetectorModel&&) noexcept;
    DetectorModel& operator=(DetectorModel&&) noexcept;

    [[nodiscard]] const ModelConfig& config() const { return config_; }
    [[nodiscard]] std::int64_t parameter_count() const;

    /// Inference with frozen batch-norm statistics. Pads, runs the network
    /// and crops back to the input length. Serialised internally, so
    /// concurrent callers are safe.
    std::vector<double> predict(const scalogram::Scalogram& input) const;
    [[nodiscard]] ForwardShapes last_forward_shapes() const;

    TrainingManifest manifest;

    /// Checkpoint file:
    ///   8 bytes   magic "AXLECKPT"
    ///   u32 LE    format version (1)
    ///   u64 LE    header length N
    ///   N bytes   UTF-8 JSON: model_config, manifest, block table
    ///   blocks    raw little-endian float32 arrays, in block-table order:
    ///             trainable parameters (topological order), batch-norm
    ///             running statistics, then Adam first and second moments.
    void save(const std::filesystem::path& path) const;
    static DetectorModel load(const std::filesystem::path& path);

    // Used by the trainer.
    nn::Network& network() { return *network_; }
    [[nodiscard]] const nn::Network& network() const { return *network_; }

private:
    ModelConfig config_;
    std::unique_ptr<nn::Network> network_;
    mutable std::unique_ptr<std::mutex> mutex_;
};

/// A scalogram window with its per-sample targets.
struct Example {
    scalogram::Scalogram input;
    std::vector<std::uint8_t> target;
    std::string passage_id;
    int sensor = 0;
};

enum class Split { Train, Validation, Test };

/// Assigns passages (not windows) to splits with a seeded shuffle of the
/// sorted unique ids, so every sensor of a passage lands in one split.
std::vector<Split> split_examples(std::span<const Example> examples, const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double val_precision = 0.0;
    double val_recall = 0.0;
    double val_f1 = 0.0;
    std::int64_t val_predicted_peaks = 0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    EpochRecord best;
    /// True if no validation peak was ever found (outputs never cleared the
    /// peak height gate): the run is unusable.
    bool collapsed = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minimises the focal loss with Adam on the training split, evaluates F1 on
/// the validation split after every epoch and leaves the best-by-F1 weights
/// in `model`. Continues epoch numbering from model.manifest.epochs_completed.
TrainResult train(DetectorModel& model, std::span<const Example> examples, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Validation-style scoring: peaks at cfg.peaks, one-to-one matching at
/// cfg.match_threshold samples, counts pooled over the given examples.
EpochRecord evaluate_examples(const DetectorModel& model, std::span<const Example> examples,
                              std::span<const std::size_t> indices, const TrainConfig& cfg);

}  // namespace axle::detector
