#include "axle/detector.hpp"
#include "axle/error.hpp"
#include "axle/random.hpp"

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <vector>

using namespace axle;
using namespace axle::detector;

namespace {

ModelConfig small_model() {
    ModelConfig c;
    c.base_feature_maps = 4;
    return c;
}

double fl(double p, std::uint8_t y, double gamma) {
    const std::vector<double> pv{p};
    const std::vector<std::uint8_t> yv{y};
    return focal_loss(pv, yv, gamma);
}

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "axle_test_detector";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("focal loss examples") {
    CHECK(fl(1.0, 1, 2.5) <= 1e-6);
    CHECK(std::abs(fl(0.5, 1, 0.0) - 0.693147) < 1e-6);
    CHECK(std::abs(fl(0.9, 1, 2.0) - 0.00105361) < 1e-8);
    CHECK(std::abs(fl(0.1, 0, 2.0) - 0.00105361) < 1e-8);

    const std::vector<double> p{0.2, 0.3};
    const std::vector<std::uint8_t> y{1};
    CHECK_THROWS_AS(focal_loss(p, y, 2.0), Error);
}

TEST_CASE("focal loss with gamma 0 is cross-entropy") {
    Rng rng(12);
    std::vector<double> p(10000);
    std::vector<std::uint8_t> y(10000);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = rng.uniform();
        y[i] = rng.uniform() < 0.3 ? 1 : 0;
    }
    CHECK(std::abs(focal_loss(p, y, 0.0) - binary_cross_entropy(p, y)) < 1e-9);
    double ref = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) ref += oracle::focal_term(p[i], y[i], 0.0);
    CHECK(std::abs(focal_loss(p, y, 0.0) - ref / static_cast<double>(p.size())) < 1e-9);
    for (double g : {0.5, 2.5}) {
        double r = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) r += oracle::focal_term(p[i], y[i], g);
        CHECK(std::abs(focal_loss(p, y, g) - r / static_cast<double>(p.size())) < 1e-12);
    }
}

TEST_CASE("focal loss gradient matches finite differences") {
    for (double g : {0.0, 1.0, 2.0, 2.5, 5.0}) {
        for (double p : {0.01, 0.3, 0.7, 0.99}) {
            for (std::uint8_t y : {0, 1}) {
                const double h = 1e-6 * std::min(p, 1.0 - p);
                const double fd = (oracle::focal_term(p + h, y, g) - oracle::focal_term(p - h, y, g)) / (2.0 * h);
                const double analytic = focal_loss_derivative(p, y, g);
                CHECK(std::abs(analytic - fd) <= 1e-4 * std::abs(fd));
            }
        }
    }
    // Zero gradient inside the clamp region.
    CHECK(focal_loss_derivative(0.0, 1, 2.0) == 0.0);
    CHECK(focal_loss_derivative(1.0, 0, 2.0) == 0.0);
}

TEST_CASE("focal loss monotonicity") {
    for (double pt = 0.05; pt < 0.99; pt += 0.05) {
        double prev = focal_loss_term(pt, 1, 0.0);
        for (double g = 0.5; g <= 5.0; g += 0.5) {
            const double cur = focal_loss_term(pt, 1, g);
            CHECK(cur < prev);
            prev = cur;
        }
    }
    for (double g : {0.0, 1.0, 2.5}) {
        double prev = focal_loss_term(0.01, 1, g);
        for (double pt = 0.02; pt < 0.999; pt += 0.01) {
            const double cur = focal_loss_term(pt, 1, g);
            CHECK(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("padding to a multiple of 16") {
    for (auto [n, want] : std::vector<std::pair<std::int64_t, std::int64_t>>{{96, 96}, {100, 112}, {1, 16}}) {
        const auto s = fixtures::random_scalogram(n, 1);
        const auto padded = pad_to_multiple_of_16(s);
        CHECK(padded.tensor.n_samples() == want);
        CHECK(padded.original_length == n);
        for (std::int64_t t = 0; t < want; ++t) {
            for (int f = 0; f < 16; ++f) {
                for (int k = 0; k < 6; ++k)
                    CHECK(padded.tensor.at(t, f, k) == (t < n ? s.at(t, f, k) : 0.0f));
            }
        }
    }
}

TEST_CASE("model configuration") {
    ModelConfig bad;
    bad.input_scales = 12;
    CHECK_THROWS_AS(DetectorModel{bad}, Error);
    bad = {};
    bad.base_feature_maps = 0;
    CHECK_THROWS_AS(DetectorModel{bad}, Error);

    TrainConfig t;
    CHECK(t.epochs == 150);
    CHECK(t.steps_per_epoch == 150);
    CHECK(t.batch_size == 16);
    CHECK(t.gamma == 2.5);
    t.test_fraction = 0.2;
    CHECK_THROWS_AS(t.validate(), Error);
    t = {};
    t.gamma = -1.0;
    CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("parameter count is a function of the configuration") {
    CHECK(DetectorModel(ModelConfig{}).parameter_count() == 2296541);
    ModelConfig eight;
    eight.base_feature_maps = 8;
    CHECK(DetectorModel(eight).parameter_count() == 577269);
    CHECK(DetectorModel(small_model()).parameter_count() == 145889);
    CHECK(DetectorModel(small_model(), 1).parameter_count() == DetectorModel(small_model(), 2).parameter_count());
}

TEST_CASE("forward shape law") {
    const DetectorModel model(small_model(), 3);
    for (std::int64_t n : {1, 15, 16, 100, 651, 4096}) {
        const auto p = model.predict(fixtures::random_scalogram(n, static_cast<std::uint64_t>(n)));
        CHECK(static_cast<std::int64_t>(p.size()) == n);
        for (double v : p) CHECK((v >= 0.0 && v <= 1.0));
        const auto shapes = model.last_forward_shapes();
        CHECK(shapes.padded_time == (n + 15) / 16 * 16);
        CHECK(shapes.bottleneck_time == shapes.padded_time / 16);
        CHECK(shapes.bottleneck_freq == 1);
    }
    // Encoder maps 16, 32, 64, 128 put 256 maps at the bottleneck.
    const DetectorModel full(ModelConfig{}, 0);
    full.predict(fixtures::random_scalogram(112, 4));
    CHECK(full.last_forward_shapes().bottleneck_time == 7);
    CHECK(full.last_forward_shapes().bottleneck_channels == 256);
}

TEST_CASE("zero input gives a translation-invariant interior") {
    const DetectorModel model(small_model(), 5);
    scalogram::Scalogram zero(512, 16, 6);
    const auto p = model.predict(zero);
    // Away from the edges every position sees the same receptive field.
    for (std::size_t t = 160; t < 352; ++t) CHECK(p[t] == doctest::Approx(p[256]).epsilon(1e-5));
}

TEST_CASE("shape mismatch") {
    const DetectorModel model(small_model());
    CHECK_THROWS_AS(model.predict(fixtures::random_scalogram(64, 1, 8, 6)), Error);
    CHECK_THROWS_AS(model.predict(fixtures::random_scalogram(64, 1, 16, 5)), Error);
}

TEST_CASE("checkpoint round trip") {
    DetectorModel model(small_model(), 9);
    model.manifest.data_fingerprint = "abc";
    model.manifest.epochs_completed = 3;
    const auto path = temp_file("model.ckpt");
    model.save(path);
    const auto loaded = DetectorModel::load(path);
    CHECK(loaded.manifest.data_fingerprint == "abc");
    CHECK(loaded.manifest.epochs_completed == 3);
    CHECK(loaded.parameter_count() == model.parameter_count());
    const auto x = fixtures::random_scalogram(200, 2);
    CHECK(loaded.predict(x) == model.predict(x));

    // Saving again gives the same bytes.
    const auto again = temp_file("again.ckpt");
    loaded.save(again);
    std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
    CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));

    const auto bad = temp_file("bad.ckpt");
    std::ofstream(bad) << "not a checkpoint";
    CHECK_THROWS_AS(DetectorModel::load(bad), Error);
    CHECK_THROWS_AS(DetectorModel::load(temp_file("missing.ckpt")), Error);
}

TEST_CASE("passage-level split") {
    const auto examples = fixtures::synthetic_examples(20, 3);
    TrainConfig cfg;
    const auto splits = split_examples(examples, cfg);
    std::map<std::string, std::set<Split>> per_passage;
    std::map<Split, std::set<std::string>> passages;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        per_passage[examples[i].passage_id].insert(splits[i]);
        passages[splits[i]].insert(examples[i].passage_id);
    }
    for (const auto& [id, s] : per_passage) CHECK(s.size() == 1);
    CHECK(passages[Split::Train].size() == 14);
    CHECK(passages[Split::Validation].size() == 4);
    CHECK(passages[Split::Test].size() == 2);
    CHECK(split_examples(examples, cfg) == splits);
    cfg.split_seed = 1;
    CHECK(split_examples(examples, cfg) != splits);
}

TEST_CASE("training is deterministic and resumable") {
    const auto examples = fixtures::synthetic_examples(6, 11);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.steps_per_epoch = 2;
    cfg.batch_size = 4;

    DetectorModel a(small_model(), 1), b(small_model(), 1);
    const auto ra = train(a, examples, cfg);
    const auto rb = train(b, examples, cfg);
    REQUIRE(ra.history.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(ra.history[i].epoch == static_cast<int>(i) + 1);
        CHECK(ra.history[i].loss == rb.history[i].loss);
        CHECK(ra.history[i].val_f1 == rb.history[i].val_f1);
    }
    CHECK(a.predict(examples[0].input) == b.predict(examples[0].input));
    CHECK(a.manifest.optimizer_steps == 4);

    const auto path = temp_file("resume.ckpt");
    a.save(path);
    auto resumed = DetectorModel::load(path);
    const auto rc = train(resumed, examples, cfg);
    CHECK(rc.history.front().epoch == 3);
    CHECK(rc.history.back().epoch == 4);
    CHECK(resumed.manifest.epochs_completed == 4);
    CHECK(resumed.manifest.optimizer_steps == 8);

    TrainConfig empty_val = cfg;
    empty_val.train_fraction = 0.9;
    empty_val.val_fraction = 0.1;
    empty_val.test_fraction = 0.0;
    DetectorModel c(small_model());
    CHECK_THROWS_AS(train(c, std::span(examples).first(2), empty_val), Error);
}

TEST_CASE("overfit smoke test") {
    // Eight passages, scored on the training windows themselves.
    const auto examples = fixtures::synthetic_examples(8, 21);
    TrainConfig cfg;
    cfg.train_fraction = 1.0;
    cfg.val_fraction = 0.0;
    cfg.test_fraction = 0.0;
    cfg.epochs = 300;
    cfg.steps_per_epoch = 4;
    cfg.batch_size = 8;
    cfg.learning_rate = 3e-3;
    cfg.stop_at_val_f1 = 1.0;
    DetectorModel model(small_model(), 2);
    const auto result = train(model, examples, cfg);
    MESSAGE("epochs used: " << result.history.size() << ", best F1 " << result.best.val_f1);
    CHECK(result.best.val_f1 == 1.0);
    std::vector<std::size_t> all(examples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    CHECK(evaluate_examples(model, examples, all, cfg).val_f1 == 1.0);
}
