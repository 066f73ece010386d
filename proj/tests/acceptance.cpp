// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance WORK_DIR
//
// Criteria 7 to 9 drive the axle executable on a synthetic dataset written
// under WORK_DIR. Criterion 10 needs a converted field dataset; point
// AXLE_FULL_DATASET at it to run that path (it is reported, never gated).

#include "axle/detector.hpp"
#include "axle/ingest.hpp"
#include "axle/io.hpp"
#include "axle/peaks.hpp"
#include "axle/postprocess.hpp"
#include "axle/random.hpp"
#include "axle/scalogram.hpp"

#include "fixtures.hpp"
#include "json.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace axle;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    bool gated = true;
    bool skipped = false;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path g_work;

// Runs the CLI; its output goes to WORK/logs/<tag>.log.
bool axle_cli(const std::string& tag, const std::string& args) {
    fs::create_directories(g_work / "logs");
    const auto log = g_work / "logs" / (tag + ".log");
    const std::string cmd = std::string(AXLE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    const bool ok = WIFEXITED(raw) && WEXITSTATUS(raw) == 0;
    if (!ok) std::fprintf(stderr, "command failed (see %s): axle %s\n", log.string().c_str(), args.c_str());
    return ok;
}

json load_json(const fs::path& p) { return json::parse(io::read_file(p)); }

const json& threshold_entry(const json& summary, const std::string& name) {
    for (const auto& t : summary["thresholds"]) {
        if (t["threshold"] == name) return t;
    }
    throw std::runtime_error("threshold " + name + " missing from summary");
}

// ---------------------------------------------------------------- 1

Outcome label_uncertainty_law() {
    Outcome o;
    const double u = ingest::label_uncertainty(57.0, 14.4);
    const double zero = ingest::label_uncertainty(0.0, 0.0);
    bool monotone = true;
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 100; ++j) {
            const double v = 0.6 * i;
            const double off = 0.3 * j;
            const double here = ingest::label_uncertainty(v, off);
            if (i > 0 && here < ingest::label_uncertainty(0.6 * (i - 1), off)) monotone = false;
            if (j > 0 && here < ingest::label_uncertainty(v, 0.3 * (j - 1))) monotone = false;
        }
    }
    o.pass = std::abs(u - 0.390) <= 1e-12 && zero == 0.0 && monotone;
    o.detail = "u(57, 14.4) = " + fmt("%.15f", u) + " m, u(0, 0) = " + fmt("%g", zero) +
               ", monotone on 100x100: " + (monotone ? "yes" : "no");
    return o;
}

// ---------------------------------------------------------------- 2

Outcome min_distance_law() {
    Outcome o;
    const auto d = postprocess::min_distance_rule(2.0, 61.1, 600.0);
    o.pass = d == 20;
    o.detail = "min_distance(2 m, 61.1 m/s, 600 Hz) = " + std::to_string(d) + " samples";
    return o;
}

// ---------------------------------------------------------------- 3

Outcome focal_loss_checks() {
    Outcome o;
    Rng rng(3);
    std::vector<double> p(10000);
    std::vector<std::uint8_t> y(10000);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = rng.uniform();
        y[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    const double ce_gap = std::abs(detector::focal_loss(p, y, 0.0) - detector::binary_cross_entropy(p, y));
    double worst_grad = 0.0;
    for (double g : {0.0, 1.0, 2.0, 2.5, 5.0}) {
        for (double pv : {0.01, 0.3, 0.7, 0.99}) {
            for (std::uint8_t yv : {0, 1}) {
                const double h = 1e-6 * std::min(pv, 1.0 - pv);
                const double fd = (oracle::focal_term(pv + h, yv, g) - oracle::focal_term(pv - h, yv, g)) / (2.0 * h);
                const double an = detector::focal_loss_derivative(pv, yv, g);
                worst_grad = std::max(worst_grad, std::abs(an - fd) / std::abs(fd));
            }
        }
    }
    const double half = detector::focal_loss_term(0.5, 1, 0.0);
    o.pass = ce_gap <= 1e-9 && worst_grad <= 1e-4 && std::abs(half - 0.693147) <= 1e-6;
    o.detail = "|FL0 - CE| = " + fmt("%.2e", ce_gap) + ", worst gradient error " + fmt("%.2e", worst_grad) +
               ", FL(0.5, 1, 0) = " + fmt("%.6f", half);
    return o;
}

// ---------------------------------------------------------------- 4

Outcome cwt_checks() {
    using scalogram::WaveletFamily;
    Outcome o;
    Rng rng(4);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(1024);
        for (auto& v : x) v = rng.normal();
        for (const auto& spec : scalogram::default_specs()) {
            const auto scales = scalogram::scale_grid(spec);
            const auto got = scalogram::cwt(x, spec.family, scales);
            const auto want = oracle::direct_cwt(x, spec.family, scales);
            double diff = 0.0, norm = 0.0;
            for (Eigen::Index r = 0; r < got.rows(); ++r) {
                for (Eigen::Index c = 0; c < got.cols(); ++c) {
                    const double w = want[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
                    diff += (got(r, c) - w) * (got(r, c) - w);
                    norm += w * w;
                }
            }
            worst = std::max(worst, std::sqrt(diff / norm));
        }
    }

    // Impulse response: the scaled, conjugated wavelet centred on the impulse.
    double worst_impulse = 0.0;
    const std::int64_t n = 600, m = 300;
    std::vector<double> impulse(n, 0.0);
    impulse[m] = 1.0;
    for (auto family : {WaveletFamily::Gaussian1, WaveletFamily::ComplexGaussian1, WaveletFamily::FrequencyBSpline}) {
        const std::vector<double> scales{1.0, 3.0, 7.5};
        const auto c = scalogram::cwt(impulse, family, scales);
        for (std::size_t s = 0; s < scales.size(); ++s) {
            const double a = scales[s];
            const auto half = static_cast<std::int64_t>(std::ceil(scalogram::support_radius(family) * a));
            for (std::int64_t b = 0; b < n; ++b) {
                std::complex<double> w = 0.0;
                if (std::llabs(m - b) <= half) w = std::conj(oracle::wavelet(family, (m - b) / a)) / std::sqrt(a);
                const double want = scalogram::is_complex(family) ? std::abs(w) : w.real();
                worst_impulse =
                    std::max(worst_impulse, std::abs(c(static_cast<Eigen::Index>(s), b) - want) / (1.0 + std::abs(want)));
            }
        }
    }

    // Zero mean: the integral of each mother wavelet over its support is
    // negligible against the integral of its magnitude.
    double worst_mean = 0.0;
    for (auto family : {WaveletFamily::Gaussian1, WaveletFamily::ComplexGaussian1, WaveletFamily::FrequencyBSpline}) {
        const double r = scalogram::support_radius(family);
        const int steps = 400000;
        const double h = 2.0 * r / steps;
        std::complex<double> sum = 0.0;
        double mag = 0.0;
        for (int i = 0; i < steps; ++i) {
            const auto w = scalogram::mother_wavelet(family, -r + (i + 0.5) * h);
            sum += w * h;
            mag += std::abs(w) * h;
        }
        worst_mean = std::max(worst_mean, std::abs(sum) / mag);
    }

    o.pass = worst <= 1e-6 && worst_impulse <= 1e-9 && worst_mean <= 1e-2;
    o.detail = "worst relative Frobenius error " + fmt("%.2e", worst) + " (6 settings x 20 signals), impulse " +
               fmt("%.2e", worst_impulse) + ", |mean|/mean|psi| " + fmt("%.2e", worst_mean);
    return o;
}

// ---------------------------------------------------------------- 5

Outcome peak_oracle() {
    Outcome o;
    Rng rng(5);
    int mismatches = 0;
    int traces = 0;
    for (int draw = 0; draw < 10; ++draw) {
        PeakParams p;
        p.min_height = rng.uniform(0.01, 0.9);
        p.min_distance = rng.uniform_int(1, 40);
        p.min_prominence = rng.uniform(0.0, 0.5);
        for (int t = 0; t < 100; ++t) {
            const auto len = static_cast<std::size_t>(rng.uniform_int(1, 500));
            std::vector<double> x(len);
            const int levels = static_cast<int>(rng.uniform_int(3, 40));
            for (std::size_t i = 0; i < len; ++i) {
                x[i] = (i > 0 && rng.uniform() < 0.2) ? x[i - 1]
                                                      : static_cast<double>(rng.uniform_int(0, levels)) / levels;
            }
            if (axle::find_peaks(x, p) != oracle::find_peaks(x, p)) ++mismatches;
            ++traces;
        }
    }
    o.pass = mismatches == 0;
    o.detail = std::to_string(traces - mismatches) + "/" + std::to_string(traces) + " traces identical";
    return o;
}

// ---------------------------------------------------------------- 6

Outcome shape_law() {
    Outcome o;
    const detector::DetectorModel model(detector::ModelConfig{}, 6);
    std::ostringstream d;
    bool ok = true;
    for (std::int64_t n : {1, 15, 16, 100, 651, 4096}) {
        const auto p = model.predict(fixtures::random_scalogram(n, static_cast<std::uint64_t>(n)));
        bool in_range = true;
        for (double v : p) in_range = in_range && v >= 0.0 && v <= 1.0;
        const auto s = model.last_forward_shapes();
        const bool here = static_cast<std::int64_t>(p.size()) == n && in_range &&
                          s.padded_time == (n + 15) / 16 * 16 && s.bottleneck_time == s.padded_time / 16 &&
                          s.bottleneck_freq == 1;
        ok = ok && here;
        d << n << "->" << s.bottleneck_time << "x" << s.bottleneck_freq << (here ? "" : " (bad)") << " ";
    }
    o.pass = ok;
    o.detail = "bottleneck time x freq: " + d.str();
    return o;
}

// ---------------------------------------------------------------- 7 to 9

struct EndToEnd {
    bool ran = false;
    double f1 = 0.0;
    double seconds = 0.0;
};

EndToEnd g_c7;

Outcome synthetic_reproduction(const std::string& config) {
    Outcome o;
    const auto t0 = Clock::now();
    const auto data = g_work / "data";
    const auto train = g_work / "c7" / "train";
    const auto eval = g_work / "c7" / "evaluate";
    for (const auto& d : {data, train, eval}) fs::remove_all(d);
    const std::string base = " --config " + config + " -q";
    if (!axle_cli("c7_synth", "synth" + base + " --out " + data.string()) ||
        !axle_cli("c7_train", "train" + base + " --data " + data.string() + " --out " + train.string()) ||
        !axle_cli("c7_evaluate", "evaluate" + base + " --data " + data.string() + " --checkpoint " +
                                     (train / "model.ckpt").string() + " --out " + eval.string())) {
        o.detail = "pipeline failed";
        return o;
    }
    const double secs = seconds_since(t0);
    const auto summary = load_json(eval / "summary.json");
    const auto& t20 = threshold_entry(summary, "20");
    const double f1 = t20["f1"];
    const double dt = t20["mean_abs_temporal_error"];
    const auto train_summary = load_json(train / "train_summary.json");
    g_c7 = {true, f1, secs};
    o.pass = f1 >= 0.95 && dt <= 3.0 && secs <= 1800.0;
    o.detail = "test F1@20 = " + fmt("%.4f", f1) + " (P " + fmt("%.4f", t20["precision"].get<double>()) + ", R " +
               fmt("%.4f", t20["recall"].get<double>()) + "), mean |dt| = " + fmt("%.3f", dt) +
               " samples, best val F1 " + fmt("%.4f", train_summary["best_val_f1"].get<double>()) + " at epoch " +
               std::to_string(train_summary["best_epoch"].get<int>()) + ", " + fmt("%.0f", secs) + " s";
    return o;
}

Outcome gamma_sensitivity(const std::string& config) {
    Outcome o;
    if (!g_c7.ran) {
        o.detail = "needs the criterion 7 run";
        return o;
    }
    // The gamma = 2.5 side is the criterion 7 run: training is deterministic,
    // so sweeping it again would reproduce the same checkpoint.
    const auto t0 = Clock::now();
    const auto data = g_work / "data";
    const auto sweep = g_work / "c8" / "sweep";
    const auto eval = g_work / "c8" / "evaluate";
    for (const auto& d : {sweep, eval}) fs::remove_all(d);
    const std::string base = " --config " + config + " -q";
    if (!axle_cli("c8_sweep", "sweep-gamma" + base + " --gammas 0 --data " + data.string() + " --out " + sweep.string()) ||
        !axle_cli("c8_evaluate", "evaluate" + base + " --data " + data.string() + " --checkpoint " +
                                     (sweep / "gamma_0" / "model.ckpt").string() + " --out " + eval.string())) {
        o.detail = "pipeline failed";
        return o;
    }
    const double secs = seconds_since(t0);
    const auto train_summary = load_json(sweep / "gamma_0" / "train_summary.json");
    const auto summary = load_json(eval / "summary.json");
    const auto& t20 = threshold_entry(summary, "20");
    const double f1 = t20["f1"];
    const auto detected = t20["tp"].get<std::int64_t>() + t20["fp"].get<std::int64_t>();
    const bool collapsed = train_summary["collapsed"].get<bool>() || detected == 0;
    o.pass = (collapsed || f1 < g_c7.f1) && secs + g_c7.seconds <= 2.0 * 1800.0;
    o.detail = std::string("gamma 0: ") + (collapsed ? "collapsed, " : "") + "test F1@20 = " + fmt("%.4f", f1) +
               " with " + std::to_string(detected) + " detections; gamma 2.5: " + fmt("%.4f", g_c7.f1) + ", " +
               fmt("%.0f", secs) + " s";
    return o;
}

Outcome determinism() {
    Outcome o;
    if (!g_c7.ran) {
        o.detail = "needs the criterion 7 run";
        return o;
    }
    const auto train = g_work / "c9" / "train";
    const auto eval = g_work / "c9" / "evaluate";
    for (const auto& d : {train, eval}) fs::remove_all(d);
    const auto first_train = g_work / "c7" / "train";
    const auto first_eval = g_work / "c7" / "evaluate";
    if (!axle_cli("c9_train", "train --deterministic -q --config " + (first_train / "manifest.json").string() +
                                  " --out " + train.string()) ||
        !axle_cli("c9_evaluate", "evaluate --deterministic -q --config " + (first_eval / "manifest.json").string() +
                                     " --checkpoint " + (train / "model.ckpt").string() + " --out " + eval.string())) {
        o.detail = "pipeline failed";
        return o;
    }
    std::vector<std::string> differing;
    int compared = 0;
    auto same = [&](const fs::path& a, const fs::path& b, const std::string& name) {
        ++compared;
        if (io::read_file(a / name) != io::read_file(b / name)) differing.push_back(name);
    };
    for (const auto& name : {"history.csv", "model.ckpt", "train_summary.json"}) same(first_train, train, name);
    for (const auto& e : fs::directory_iterator(first_eval)) {
        if (e.path().extension() == ".csv") same(first_eval, eval, e.path().filename().string());
    }
    same(first_eval, eval, "summary.json");
    const auto f1_a = threshold_entry(load_json(first_eval / "summary.json"), "20")["f1"].dump();
    const auto f1_b = threshold_entry(load_json(eval / "summary.json"), "20")["f1"].dump();
    o.pass = differing.empty() && f1_a == f1_b;
    o.detail = std::to_string(compared - static_cast<int>(differing.size())) + "/" + std::to_string(compared) +
               " outputs byte-identical, F1 " + f1_a + " vs " + f1_b;
    for (const auto& d : differing) o.detail += ", differs: " + d;
    return o;
}

// ---------------------------------------------------------------- 10

Outcome full_scale(const std::string& config) {
    Outcome o;
    o.gated = false;
    const char* dir = std::getenv("AXLE_FULL_DATASET");
    if (dir == nullptr || !fs::is_directory(dir)) {
        o.skipped = true;
        o.detail = "no converted field dataset (set AXLE_FULL_DATASET to run it)";
        return o;
    }
    const auto train = g_work / "c10" / "train";
    const auto eval = g_work / "c10" / "evaluate";
    const std::string base = " -q --data " + std::string(dir);
    const std::string cfg = std::getenv("AXLE_FULL_CONFIG") ? std::string(" --config ") + std::getenv("AXLE_FULL_CONFIG")
                                                            : std::string(" --config ") + config;
    if (!axle_cli("c10_train", "train" + cfg + base + " --out " + train.string()) ||
        !axle_cli("c10_evaluate", "evaluate" + cfg + base + " --checkpoint " + (train / "model.ckpt").string() +
                                      " --out " + eval.string())) {
        o.detail = "pipeline failed";
        return o;
    }
    const double f1 = threshold_entry(load_json(eval / "summary.json"), "0.37m")["f1"];
    o.pass = std::abs(f1 - 0.915) <= 0.05;
    o.detail = "F1 at 0.37 m = " + fmt("%.4f", f1) + " (field reference 0.915)";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    g_work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "axle_acceptance";
    fs::create_directories(g_work);
    const std::string config = argc > 2 ? argv[2] : AXLE_ACCEPTANCE_CONFIG;

    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "label uncertainty", 1.0, label_uncertainty_law},
        {2, "minimum peak distance", 1.0, min_distance_law},
        {3, "focal loss", 5.0, focal_loss_checks},
        {4, "CWT against direct convolution", 30.0, cwt_checks},
        {5, "peak finder against reference", 30.0, peak_oracle},
        {6, "architecture shape law", 60.0, shape_law},
        {7, "synthetic end to end", 1800.0, [&] { return synthetic_reproduction(config); }},
        {8, "gamma sensitivity", 3600.0, [&] { return gamma_sensitivity(config); }},
        {9, "determinism from manifest", 3600.0, determinism},
        {10, "field-scale path", 0.0, [&] { return full_scale(config); }},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = seconds_since(t0);
        if (c.budget_s > 0.0 && secs > c.budget_s) {
            o.pass = false;
            o.detail += ", over the " + fmt("%.0f", c.budget_s) + " s budget";
        }
        const char* verdict = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
        std::printf("criterion %2d %s: %s  %s  [%.2f s]%s\n", c.id, verdict, c.name, o.detail.c_str(), secs,
                    o.gated ? "" : " (not gated)");
        std::fflush(stdout);
        if (o.gated && !o.pass) ++failed;
    }
    std::printf("%d gated criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
