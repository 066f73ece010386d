#include "axle/detector.hpp"

#include "axle/error.hpp"
#include "axle/postprocess.hpp"
#include "axle/random.hpp"
#include "axle/version.hpp"
#include "json_convert.hpp"
#include "nn/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace axle::detector {

namespace {

constexpr char kMagic[8] = {'A', 'X', 'L', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

double clamp_probability(double p) { return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon); }

bool clamp_active(double p) { return p < kProbabilityEpsilon || p > 1.0 - kProbabilityEpsilon; }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

nn::NetworkShape network_shape(const ModelConfig& c) {
    nn::NetworkShape s;
    s.depth = c.depth;
    s.base_feature_maps = c.base_feature_maps;
    s.input_channels = c.input_channels;
    s.input_scales = c.input_scales;
    s.kernel_time = c.kernel_time;
    s.kernel_freq = c.kernel_freq;
    s.bn_momentum = static_cast<float>(c.bn_momentum);
    return s;
}

void check_input_shape(const ModelConfig& config, const scalogram::Scalogram& input) {
    if (input.n_samples() < 1) throw Error(ErrorKind::InvalidInput, "scalogram has no time steps");
    if (input.n_scales() != config.input_scales || input.n_transforms() != config.input_channels)
        throw Error(ErrorKind::InvalidInput,
                    "scalogram shape (" + std::to_string(input.n_scales()) + " scales, " +
                        std::to_string(input.n_transforms()) + " transforms) does not match the model (" +
                        std::to_string(config.input_scales) + ", " + std::to_string(config.input_channels) + ")");
}

// Copies a time-major scalogram into batch item `b` of a [B][K][T][F] tensor.
void fill_item(nn::Tensor& t, int b, const scalogram::Scalogram& s) {
    const int n_f = s.n_scales();
    const int n_k = s.n_transforms();
    const auto data = s.data();
    for (int k = 0; k < n_k; ++k) {
        float* dst = t.channel(b, k);
        for (std::int64_t i = 0; i < s.n_samples(); ++i) {
            const float* src = data.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(n_f * n_k);
            for (int f = 0; f < n_f; ++f) dst[i * n_f + f] = src[f * n_k + k];
        }
    }
}

std::int64_t round_up(std::int64_t n, std::int64_t multiple) { return (n + multiple - 1) / multiple * multiple; }

struct Snapshot {
    std::vector<nn::FloatBuffer> params;
    std::vector<nn::FloatBuffer> buffers;
};

Snapshot take_snapshot(const nn::Network& net) {
    Snapshot s;
    for (const nn::Param* p : net.params()) s.params.push_back(p->value);
    for (const nn::Buffer* b : net.buffers()) s.buffers.push_back(b->value);
    return s;
}

void restore_snapshot(nn::Network& net, const Snapshot& s) {
    for (std::size_t i = 0; i < s.params.size(); ++i) net.params()[i]->value = s.params[i];
    for (std::size_t i = 0; i < s.buffers.size(); ++i) net.buffers()[i]->value = s.buffers[i];
}

void write_floats(std::ostream& out, const nn::FloatBuffer& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_floats(std::istream& in, nn::FloatBuffer& v, const std::string& what) {
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!in) throw Error(ErrorKind::Io, "checkpoint truncated while reading block '" + what + "'");
}

}  // namespace

// ---------------------------------------------------------------- configs

void ModelConfig::validate() const {
    if (depth < 1 || depth > 12) throw Error(ErrorKind::Config, "model.depth must be in [1, 12]");
    if (base_feature_maps < 1) throw Error(ErrorKind::Config, "model.base_feature_maps must be >= 1");
    if (input_channels < 1) throw Error(ErrorKind::Config, "model.input_channels must be >= 1");
    if (input_scales != (1 << depth))
        throw Error(ErrorKind::Config, "model.input_scales (" + std::to_string(input_scales) +
                                           ") must equal 2^depth (" + std::to_string(1 << depth) + ")");
    if (kernel_time < 1 || kernel_time % 2 == 0 || kernel_freq < 1 || kernel_freq % 2 == 0)
        throw Error(ErrorKind::Config, "model kernel sizes must be odd and >= 1");
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0))
        throw Error(ErrorKind::Config, "model.bn_momentum must be in [0, 1)");
}

void TrainConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw Error(ErrorKind::Config, "train.gamma must be >= 0");
    if (epochs < 1) throw Error(ErrorKind::Config, "train.epochs must be >= 1");
    if (steps_per_epoch < 1) throw Error(ErrorKind::Config, "train.steps_per_epoch must be >= 1");
    if (batch_size < 1) throw Error(ErrorKind::Config, "train.batch_size must be >= 1");
    if (train_fraction < 0.0 || val_fraction < 0.0 || test_fraction < 0.0 ||
        std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
        throw Error(ErrorKind::Config, "train.split fractions must be non-negative and sum to 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "train.learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw Error(ErrorKind::Config, "train Adam betas must be in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw Error(ErrorKind::Config, "train.adam_epsilon must be > 0");
    if (match_threshold < 0) throw Error(ErrorKind::Config, "train.match_threshold must be >= 0");
    if (length_buckets < 1) throw Error(ErrorKind::Config, "train.length_buckets must be >= 1");
    if (!(stop_at_val_f1 >= 0.0 && stop_at_val_f1 <= 1.0))
        throw Error(ErrorKind::Config, "train.stop_at_val_f1 must be in [0, 1]");
    peaks.validate();
}

// ---------------------------------------------------------------- loss

double focal_loss_term(double p, std::uint8_t y, double gamma) {
    const double q = clamp_probability(p);
    const double pt = y != 0 ? q : 1.0 - q;
    return -std::pow(1.0 - pt, gamma) * std::log(pt);
}

double focal_loss_derivative(double p, std::uint8_t y, double gamma) {
    if (clamp_active(p)) return 0.0;
    const double pt = y != 0 ? p : 1.0 - p;
    // d/dpt of -(1 - pt)^g ln pt
    const double modulating = gamma == 0.0 ? 0.0 : gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt);
    const double d_pt = modulating - std::pow(1.0 - pt, gamma) / pt;
    return y != 0 ? d_pt : -d_pt;
}

double focal_loss(std::span<const double> p, std::span<const std::uint8_t> y, double gamma) {
    if (p.size() != y.size()) throw Error(ErrorKind::InvalidInput, "focal_loss: length mismatch");
    if (!(gamma >= 0.0)) throw Error(ErrorKind::InvalidInput, "focal_loss: gamma must be >= 0");
    if (p.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += focal_loss_term(p[i], y[i], gamma);
    return sum / static_cast<double>(p.size());
}

double binary_cross_entropy(std::span<const double> p, std::span<const std::uint8_t> y) {
    if (p.size() != y.size()) throw Error(ErrorKind::InvalidInput, "binary_cross_entropy: length mismatch");
    if (p.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = clamp_probability(p[i]);
        sum -= y[i] != 0 ? std::log(q) : std::log(1.0 - q);
    }
    return sum / static_cast<double>(p.size());
}

// ---------------------------------------------------------------- padding

PaddedScalogram pad_to_multiple(const scalogram::Scalogram& input, std::int64_t multiple) {
    if (multiple < 1) throw Error(ErrorKind::InvalidInput, "padding multiple must be >= 1");
    if (input.n_samples() < 1) throw Error(ErrorKind::InvalidInput, "scalogram has no time steps");
    const std::int64_t padded = round_up(input.n_samples(), multiple);
    PaddedScalogram out{scalogram::Scalogram(padded, input.n_scales(), input.n_transforms(), input.window_start()),
                        input.n_samples()};
    const auto src = input.data();
    std::copy(src.begin(), src.end(), out.tensor.data().begin());
    return out;
}

// ---------------------------------------------------------------- model

DetectorModel::DetectorModel(const ModelConfig& config, std::uint64_t init_seed)
    : config_(config), mutex_(std::make_unique<std::mutex>()) {
    config_.validate();
    network_ = std::make_unique<nn::Network>(network_shape(config_));
    network_->initialize(init_seed);
}

DetectorModel::~DetectorModel() = default;
DetectorModel::DetectorModel(DetectorModel&&) noexcept = default;
DetectorModel& DetectorModel::operator=(DetectorModel&&) noexcept = default;

std::int64_t DetectorModel::parameter_count() const {
    std::int64_t n = 0;
    for (const nn::Param* p : network_->params()) n += static_cast<std::int64_t>(p->value.size());
    return n;
}

std::vector<double> DetectorModel::predict(const scalogram::Scalogram& input) const {
    check_input_shape(config_, input);
    const std::lock_guard lock(*mutex_);
    const std::int64_t padded = round_up(input.n_samples(), config_.time_multiple());

    nn::Tensor x;
    x.resize(1, config_.input_channels, padded, config_.input_scales);
    x.lengths = {input.n_samples()};
    fill_item(x, 0, input);

    const nn::Tensor& logits = network_->forward(x, false);
    std::vector<double> out(static_cast<std::size_t>(input.n_samples()));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(static_cast<double>(logits.data[i]));
    network_->release();
    return out;
}

ForwardShapes DetectorModel::last_forward_shapes() const {
    const std::lock_guard lock(*mutex_);
    const auto& t = network_->trace();
    return {t.input_time, t.bottleneck_time, t.bottleneck_freq, t.bottleneck_channels};
}

void DetectorModel::save(const std::filesystem::path& path) const {
    using nlohmann::json;
    const std::lock_guard lock(*mutex_);
    const auto& net = *network_;

    json blocks = json::array();
    for (const nn::Param* p : net.params()) blocks.push_back({{"name", p->name}, {"kind", "param"}, {"count", p->value.size()}});
    for (const nn::Buffer* b : net.buffers())
        blocks.push_back({{"name", b->name}, {"kind", "buffer"}, {"count", b->value.size()}});
    for (const nn::Param* p : net.params()) blocks.push_back({{"name", p->name}, {"kind", "adam_m"}, {"count", p->m.size()}});
    for (const nn::Param* p : net.params()) blocks.push_back({{"name", p->name}, {"kind", "adam_v"}, {"count", p->v.size()}});

    const json header = {{"format_version", kFormatVersion},
                         {"model_config", config_},
                         {"manifest",
                          {{"train", manifest.train},
                           {"data_fingerprint", manifest.data_fingerprint},
                           {"epochs_completed", manifest.epochs_completed},
                           {"optimizer_steps", manifest.optimizer_steps},
                           {"toolkit_version", manifest.toolkit_version}}},
                         {"blocks", blocks}};
    const std::string text = header.dump();

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint " + tmp.string());
        out.write(kMagic, sizeof kMagic);
        const std::uint32_t version = kFormatVersion;
        out.write(reinterpret_cast<const char*>(&version), sizeof version);
        const std::uint64_t length = text.size();
        out.write(reinterpret_cast<const char*>(&length), sizeof length);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const nn::Param* p : net.params()) write_floats(out, p->value);
        for (const nn::Buffer* b : net.buffers()) write_floats(out, b->value);
        for (const nn::Param* p : net.params()) write_floats(out, p->m);
        for (const nn::Param* p : net.params()) write_floats(out, p->v);
        if (!out) throw Error(ErrorKind::Io, "failed writing checkpoint " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

DetectorModel DetectorModel::load(const std::filesystem::path& path) {
    using nlohmann::json;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());

    char magic[8] = {};
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw Error(ErrorKind::Io, path.string() + " is not a model checkpoint");
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    if (!in || version != kFormatVersion)
        throw Error(ErrorKind::Io, "unsupported checkpoint format version " + std::to_string(version));
    std::uint64_t length = 0;
    in.read(reinterpret_cast<char*>(&length), sizeof length);
    if (!in || length > (std::uint64_t{1} << 30)) throw Error(ErrorKind::Io, "corrupt checkpoint header length");
    std::string text(length, '\0');
    in.read(text.data(), static_cast<std::streamsize>(length));
    if (!in) throw Error(ErrorKind::Io, "checkpoint truncated in header");

    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, "corrupt checkpoint header: " + std::string(e.what()));
    }

    ModelConfig config;
    TrainingManifest manifest;
    std::vector<std::tuple<std::string, std::string, std::size_t>> blocks;
    try {
        config = header.at("model_config").get<ModelConfig>();
        const auto& m = header.at("manifest");
        manifest.train = m.at("train").get<TrainConfig>();
        manifest.data_fingerprint = m.at("data_fingerprint").get<std::string>();
        manifest.epochs_completed = m.at("epochs_completed").get<int>();
        manifest.optimizer_steps = m.at("optimizer_steps").get<std::int64_t>();
        manifest.toolkit_version = m.at("toolkit_version").get<std::string>();
        for (const auto& b : header.at("blocks"))
            blocks.emplace_back(b.at("name").get<std::string>(), b.at("kind").get<std::string>(),
                                b.at("count").get<std::size_t>());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, "corrupt checkpoint header: " + std::string(e.what()));
    }

    DetectorModel model(config);
    model.manifest = manifest;
    auto& net = *model.network_;

    // Expected block table, in file order.
    std::vector<std::tuple<std::string, std::string, nn::FloatBuffer*>> expected;
    for (nn::Param* p : net.params()) expected.emplace_back(p->name, "param", &p->value);
    for (nn::Buffer* b : net.buffers()) expected.emplace_back(b->name, "buffer", &b->value);
    for (nn::Param* p : net.params()) expected.emplace_back(p->name, "adam_m", &p->m);
    for (nn::Param* p : net.params()) expected.emplace_back(p->name, "adam_v", &p->v);
    if (expected.size() != blocks.size())
        throw Error(ErrorKind::Io, "checkpoint block table does not match the model configuration");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& [name, kind, count] = blocks[i];
        const auto& [want_name, want_kind, dst] = expected[i];
        if (name != want_name || kind != want_kind || count != dst->size())
            throw Error(ErrorKind::Io, "checkpoint block " + std::to_string(i) + " ('" + name + "', " + kind +
                                           ") does not match the model ('" + want_name + "', " + want_kind + ")");
        read_floats(in, *dst, name);
    }
    return model;
}

// ---------------------------------------------------------------- data split

std::vector<Split> split_examples(std::span<const Example> examples, const TrainConfig& cfg) {
    cfg.validate();
    const std::set<std::string> unique_ids = [&] {
        std::set<std::string> ids;
        for (const auto& e : examples) ids.insert(e.passage_id);
        return ids;
    }();
    std::vector<std::string> ids(unique_ids.begin(), unique_ids.end());
    Rng rng(cfg.split_seed);
    rng.shuffle(std::span<std::string>(ids));

    const auto n = static_cast<double>(ids.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * cfg.train_fraction));
    const auto n_val = std::min(ids.size() - std::min(ids.size(), n_train),
                                static_cast<std::size_t>(std::llround(n * cfg.val_fraction)));

    std::map<std::string, Split> assignment;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Split s = i < n_train ? Split::Train : i < n_train + n_val ? Split::Validation : Split::Test;
        assignment.emplace(ids[i], s);
    }
    std::vector<Split> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(assignment.at(e.passage_id));
    return out;
}

// ---------------------------------------------------------------- training

EpochRecord evaluate_examples(const DetectorModel& model, std::span<const Example> examples,
                              std::span<const std::size_t> indices, const TrainConfig& cfg) {
    postprocess::Counts counts;
    std::int64_t predicted = 0;
    for (std::size_t idx : indices) {
        const Example& ex = examples[idx];
        const auto p = model.predict(ex.input);
        const auto peaks = find_peaks(p, cfg.peaks);
        std::vector<std::int64_t> gt;
        for (std::size_t i = 0; i < ex.target.size(); ++i) {
            if (ex.target[i] != 0) gt.push_back(static_cast<std::int64_t>(i));
        }
        counts += postprocess::match_peaks(peaks, gt, cfg.match_threshold).counts;
        predicted += static_cast<std::int64_t>(peaks.size());
    }
    const auto scores = postprocess::score(counts);
    EpochRecord r;
    r.val_precision = scores.precision;
    r.val_recall = scores.recall;
    r.val_f1 = scores.f1;
    r.val_predicted_peaks = predicted;
    return r;
}

namespace {

class AdamOptimizer {
public:
    AdamOptimizer(const TrainConfig& cfg, std::int64_t steps_done)
        : lr_(cfg.learning_rate), beta1_(cfg.adam_beta1), beta2_(cfg.adam_beta2), eps_(cfg.adam_epsilon),
          step_(steps_done) {}

    void apply(const std::vector<nn::Param*>& params) {
        ++step_;
        const double t = static_cast<double>(step_);
        const double lr_t = lr_ * std::sqrt(1.0 - std::pow(beta2_, t)) / (1.0 - std::pow(beta1_, t));
        const auto b1 = static_cast<float>(beta1_);
        const auto b2 = static_cast<float>(beta2_);
        const auto lr = static_cast<float>(lr_t);
        const auto eps = static_cast<float>(eps_);
        for (nn::Param* p : params) {
            for (std::size_t i = 0; i < p->value.size(); ++i) {
                const float g = p->grad[i];
                p->m[i] = b1 * p->m[i] + (1.0F - b1) * g;
                p->v[i] = b2 * p->v[i] + (1.0F - b2) * g * g;
                p->value[i] -= lr * p->m[i] / (std::sqrt(p->v[i]) + eps);
            }
        }
    }

    [[nodiscard]] std::int64_t steps() const { return step_; }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    std::int64_t step_;
};

// Cycles through the training windows in a fresh shuffled order each pass.
// Groups of batch_size * buckets consecutive draws are sorted by length and
// cut into batches, so windows of similar length share a batch and padding
// stays small; every window is still used exactly once per pass.
class BatchSampler {
public:
    BatchSampler(std::vector<std::size_t> pool, std::vector<std::int64_t> lengths, int batch_size, int buckets,
                 std::uint64_t seed)
        : pool_(std::move(pool)), lengths_(std::move(lengths)), batch_size_(batch_size), buckets_(buckets), rng_(seed) {
        rng_.shuffle(std::span<std::size_t>(pool_));
    }

    std::vector<std::size_t> next() {
        if (ready_.empty()) refill();
        auto batch = std::move(ready_.back());
        ready_.pop_back();
        return batch;
    }

private:
    std::size_t draw() {
        if (cursor_ == pool_.size()) {
            rng_.shuffle(std::span<std::size_t>(pool_));
            cursor_ = 0;
        }
        return pool_[cursor_++];
    }

    void refill() {
        std::vector<std::size_t> group(static_cast<std::size_t>(batch_size_) * static_cast<std::size_t>(buckets_));
        for (auto& g : group) g = draw();
        std::stable_sort(group.begin(), group.end(),
                         [this](std::size_t a, std::size_t b) { return lengths_[a] < lengths_[b]; });
        for (int k = 0; k < buckets_; ++k) {
            const auto first = group.begin() + static_cast<std::ptrdiff_t>(k) * batch_size_;
            ready_.emplace_back(first, first + batch_size_);
        }
        rng_.shuffle(std::span<std::vector<std::size_t>>(ready_));
    }

    std::vector<std::size_t> pool_;
    std::vector<std::int64_t> lengths_;
    int batch_size_;
    int buckets_;
    Rng rng_;
    std::size_t cursor_ = 0;
    std::vector<std::vector<std::size_t>> ready_;
};

}  // namespace

TrainResult train(DetectorModel& model, std::span<const Example> examples, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    const ModelConfig& mc = model.config();
    for (const auto& ex : examples) {
        check_input_shape(mc, ex.input);
        if (static_cast<std::int64_t>(ex.target.size()) != ex.input.n_samples())
            throw Error(ErrorKind::InvalidInput, "target length does not match scalogram length for passage " +
                                                     ex.passage_id + " sensor " + std::to_string(ex.sensor));
    }

    const auto splits = split_examples(examples, cfg);
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    for (std::size_t i = 0; i < splits.size(); ++i) {
        if (splits[i] == Split::Train) train_idx.push_back(i);
        if (splits[i] == Split::Validation) val_idx.push_back(i);
    }
    if (train_idx.empty()) throw Error(ErrorKind::Config, "training split is empty");
    // A zero validation fraction scores the training windows instead (smoke
    // tests and overfitting checks).
    if (val_idx.empty() && cfg.val_fraction == 0.0) val_idx = train_idx;
    if (val_idx.empty()) throw Error(ErrorKind::Config, "validation split is empty");

    nn::Network& net = model.network();
    AdamOptimizer adam(cfg, model.manifest.optimizer_steps);
    // Offset by the steps already taken so a resumed run does not replay the
    // same batch order.
    std::vector<std::int64_t> lengths(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) lengths[i] = examples[i].input.n_samples();
    BatchSampler sampler(train_idx, std::move(lengths), cfg.batch_size, cfg.length_buckets,
                         cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(adam.steps() + 1)));

    TrainResult result;
    Snapshot best_weights;
    bool have_best = false;
    bool any_peaks = false;

    nn::Tensor input;
    nn::Tensor grad_logits;
    const int first_epoch = model.manifest.epochs_completed + 1;
    for (int e = 0; e < cfg.epochs; ++e) {
        const int epoch = first_epoch + e;
        double loss_sum = 0.0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            const auto batch = sampler.next();
            std::int64_t max_len = 0;
            for (std::size_t i : batch) max_len = std::max(max_len, examples[i].input.n_samples());
            const std::int64_t padded = round_up(max_len, mc.time_multiple());

            const int b_count = static_cast<int>(batch.size());
            input.resize(b_count, mc.input_channels, padded, mc.input_scales);
            input.lengths.clear();
            std::int64_t n_valid = 0;
            for (int b = 0; b < b_count; ++b) {
                const auto& ex = examples[batch[static_cast<std::size_t>(b)]];
                fill_item(input, b, ex.input);
                input.lengths.push_back(ex.input.n_samples());
                n_valid += ex.input.n_samples();
            }

            const nn::Tensor& logits = net.forward(input, true);
            grad_logits.resize_like(logits, 1);
            double loss = 0.0;
            const double inv_n = 1.0 / static_cast<double>(n_valid);
            for (int b = 0; b < b_count; ++b) {
                const auto& ex = examples[batch[static_cast<std::size_t>(b)]];
                const float* z = logits.item(b);
                float* g = grad_logits.item(b);
                for (std::int64_t t = 0; t < ex.input.n_samples(); ++t) {
                    const double p = sigmoid(static_cast<double>(z[t]));
                    const std::uint8_t y = ex.target[static_cast<std::size_t>(t)];
                    loss += focal_loss_term(p, y, cfg.gamma);
                    g[t] = static_cast<float>(focal_loss_derivative(p, y, cfg.gamma) * p * (1.0 - p) * inv_n);
                }
            }
            loss *= inv_n;
            if (!std::isfinite(loss))
                throw Error(ErrorKind::TrainingDiverged, "non-finite loss at epoch " + std::to_string(epoch) +
                                                             ", step " + std::to_string(step + 1));
            loss_sum += loss;
            net.backward(grad_logits);
            adam.apply(net.params());
        }
        net.release();

        EpochRecord record = evaluate_examples(model, examples, val_idx, cfg);
        record.epoch = epoch;
        record.loss = loss_sum / static_cast<double>(cfg.steps_per_epoch);
        any_peaks = any_peaks || record.val_predicted_peaks > 0;
        result.history.push_back(record);
        if (!have_best || record.val_f1 > result.best.val_f1) {
            result.best = record;
            result.best_epoch = epoch;
            best_weights = take_snapshot(net);
            have_best = true;
        }
        model.manifest.epochs_completed = epoch;
        model.manifest.optimizer_steps = adam.steps();
        if (on_epoch) on_epoch(record);
        if (cfg.stop_at_val_f1 > 0.0 && record.val_f1 >= cfg.stop_at_val_f1) break;
    }

    restore_snapshot(net, best_weights);
    model.manifest.train = cfg;
    model.manifest.toolkit_version = kVersion;
    result.collapsed = !any_peaks;
    return result;
}

}  // namespace axle::detector
