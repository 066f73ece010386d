// Microbenchmarks for the hot paths: scalogram construction, peak finding,
// inference and a training step.

#include "axle/detector.hpp"
#include "axle/ingest.hpp"
#include "axle/peaks.hpp"
#include "axle/random.hpp"
#include "axle/scalogram.hpp"
#include "axle/synth.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

namespace {

using namespace axle;

std::vector<double> noise(std::int64_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = rng.normal();
    return x;
}

scalogram::Scalogram random_scalogram(std::int64_t n) {
    Rng rng(1);
    scalogram::Scalogram s(n, 16, 6);
    for (auto& v : s.data()) v = static_cast<float>(rng.uniform());
    return s;
}

void BM_Scalogram(benchmark::State& state) {
    const auto x = noise(state.range(0), 1);
    const auto specs = scalogram::default_specs();
    for (auto _ : state) benchmark::DoNotOptimize(scalogram::build_scalogram(x, specs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Scalogram)->Arg(651)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_FindPeaks(benchmark::State& state) {
    // Smooth probability-like trace with a bump every 60 samples.
    std::vector<double> p(static_cast<std::size_t>(state.range(0)));
    Rng rng(2);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(i % 60) - 30.0;
        p[i] = std::exp(-d * d / 20.0) * 0.9 + 0.05 * rng.uniform();
    }
    const PeakParams params;
    for (auto _ : state) benchmark::DoNotOptimize(find_peaks(p, params));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FindPeaks)->Arg(651)->Arg(100000);

void BM_Predict(benchmark::State& state) {
    detector::ModelConfig cfg;
    cfg.base_feature_maps = static_cast<int>(state.range(1));
    const detector::DetectorModel model(cfg, 1);
    const auto input = random_scalogram(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(model.predict(input));
}
BENCHMARK(BM_Predict)->Args({651, 4})->Args({651, 16})->Unit(benchmark::kMillisecond);

// One optimizer step followed by the validation pass over the same windows.
void BM_TrainStep(benchmark::State& state) {
    std::vector<detector::Example> examples;
    const synth::DatasetSpec spec;
    const auto specs = scalogram::default_specs();
    for (int i = 0; i < 2; ++i) {
        const auto [passage, truth] = synth::simulate_passage(synth::random_scenario(spec, 3, i));
        const auto labelled = ingest::label_passage(passage);
        for (int s = 0; s < static_cast<int>(passage.n_sensors()); ++s) {
            auto w = scalogram::transform_passage(passage, labelled.labels, s, specs);
            examples.push_back({std::move(w.scalogram), std::move(w.target), passage.id, s});
        }
    }
    detector::ModelConfig mc;
    mc.base_feature_maps = 4;
    detector::TrainConfig tc;
    tc.epochs = 1;
    tc.steps_per_epoch = 1;
    tc.batch_size = static_cast<int>(state.range(0));
    tc.train_fraction = 1.0;
    tc.val_fraction = 0.0;
    tc.test_fraction = 0.0;
    for (auto _ : state) {
        detector::DetectorModel model(mc, 1);
        benchmark::DoNotOptimize(detector::train(model, examples, tc));
    }
}
BENCHMARK(BM_TrainStep)->Arg(8)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
