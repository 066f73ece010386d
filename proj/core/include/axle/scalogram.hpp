#pragma once

#include "axle/types.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace axle::scalogram {

enum class WaveletFamily {
    ComplexGaussian1,  // first derivative of a complex Gaussian ("cgau1")
    Gaussian1,         // first derivative of a Gaussian ("gaus1")
    FrequencyBSpline,  // frequency B-spline, order 1, bandwidth 1.5, centre 1.0 ("fbsp")
};

std::string_view to_string(WaveletFamily family) noexcept;
WaveletFamily family_from_string(std::string_view name);

/// Mother wavelet value at time t.
std::complex<double> mother_wavelet(WaveletFamily family, double t);

/// Effective support [-r, r] of the mother wavelet.
double support_radius(WaveletFamily family);

bool is_complex(WaveletFamily family) noexcept;

struct WaveletSpec {
    WaveletFamily family = WaveletFamily::Gaussian1;
    double scale_min = 1.0;
    double scale_max = 8.0;
    int n_scales = 16;

    void validate() const;
};

/// The six (family, band) settings used to build model inputs.
std::array<WaveletSpec, 6> default_specs();

/// Evenly spaced scales from scale_min to scale_max inclusive.
std::vector<double> scale_grid(const WaveletSpec& spec);

/// Discretised analysing kernel for one scale: taps for offsets
/// -half_width..half_width, value conj(psi(k / scale)) / sqrt(scale).
struct ScaledKernel {
    std::int64_t half_width = 0;
    std::vector<std::complex<double>> taps;
};

ScaledKernel scaled_kernel(WaveletFamily family, double scale);

/// Continuous wavelet transform, rows = scales, columns = samples.
///
/// c(a, b) = sum_n x[n] conj(psi((n - b) / a)) / sqrt(a), zero-extended at
/// the edges. Complex families return |c|, real families the signed value.
/// Computed with FFT convolution.
Matrix cwt(std::span<const double> signal, WaveletFamily family, std::span<const double> scales);

/// Min-max scaling to [0, 1]; a constant input maps to zeros.
Matrix normalize(const Matrix& m);

/// Time-major tensor n_s x n_f x n_t of float values in [0, 1].
class Scalogram {
public:
    Scalogram() = default;
    Scalogram(std::int64_t n_samples, int n_scales, int n_transforms, std::int64_t window_start = 0);

    [[nodiscard]] std::int64_t n_samples() const { return n_samples_; }
    [[nodiscard]] int n_scales() const { return n_scales_; }
    [[nodiscard]] int n_transforms() const { return n_transforms_; }
    [[nodiscard]] std::int64_t window_start() const { return window_start_; }

    float& at(std::int64_t t, int f, int k) { return data_[index(t, f, k)]; }
    [[nodiscard]] float at(std::int64_t t, int f, int k) const { return data_[index(t, f, k)]; }

    [[nodiscard]] std::span<const float> data() const { return data_; }
    [[nodiscard]] std::span<float> data() { return data_; }

private:
    [[nodiscard]] std::size_t index(std::int64_t t, int f, int k) const {
        return (static_cast<std::size_t>(t) * static_cast<std::size_t>(n_scales_) + static_cast<std::size_t>(f)) *
                   static_cast<std::size_t>(n_transforms_) +
               static_cast<std::size_t>(k);
    }

    std::int64_t n_samples_ = 0;
    int n_scales_ = 0;
    int n_transforms_ = 0;
    std::int64_t window_start_ = 0;
    std::vector<float> data_;
};

struct Window {
    std::int64_t start = 0;  // inclusive
    std::int64_t end = 0;    // exclusive
    [[nodiscard]] std::int64_t length() const { return end - start; }
};

inline constexpr std::int64_t kSamplesBeforeFirstAxle = 150;
inline constexpr std::int64_t kSamplesAfterLastAxle = 500;
inline constexpr std::int64_t kMinWindowLength = 16;

/// [first - 150, last + 500] clamped to the recording.
Window axle_window(std::int64_t first_crossing, std::int64_t last_crossing, std::int64_t n_samples);

/// Builds one scalogram from a signal slice: one channel per spec, each
/// independently normalised.
Scalogram build_scalogram(std::span<const double> signal, std::span<const WaveletSpec> specs,
                          std::int64_t window_start = 0);

struct TransformedWindow {
    Scalogram scalogram;
    std::vector<std::uint8_t> target;
    std::int64_t window_start = 0;
};

TransformedWindow transform_passage(const PassageRecord& passage, const LabelSet& labels, int sensor,
                                    std::span<const WaveletSpec> specs);

}  // namespace axle::scalogram
