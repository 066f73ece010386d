#include "axle/error.hpp"
#include "axle/scalogram.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace axle::scalogram {

namespace {

constexpr double kPi = std::numbers::pi;

// Frequency B-spline parameters of the default "fbsp" wavelet: order 1,
// bandwidth 1.5, centre frequency 1.0.
constexpr int kFbspOrder = 1;
constexpr double kFbspBandwidth = 1.5;
constexpr double kFbspCentre = 1.0;

double normalized_sinc(double x) {
    if (x == 0.0) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

std::string_view to_string(WaveletFamily family) noexcept {
    switch (family) {
        case WaveletFamily::ComplexGaussian1: return "cgau1";
        case WaveletFamily::Gaussian1: return "gaus1";
        case WaveletFamily::FrequencyBSpline: return "fbsp";
    }
    return "unknown";
}

WaveletFamily family_from_string(std::string_view name) {
    if (name == "cgau1") return WaveletFamily::ComplexGaussian1;
    if (name == "gaus1") return WaveletFamily::Gaussian1;
    if (name == "fbsp" || name == "fbsp1-1.5-1.0") return WaveletFamily::FrequencyBSpline;
    throw Error(ErrorKind::Config, "unknown wavelet family '" + std::string(name) + "'");
}

bool is_complex(WaveletFamily family) noexcept { return family != WaveletFamily::Gaussian1; }

double support_radius(WaveletFamily family) {
    switch (family) {
        case WaveletFamily::ComplexGaussian1:
        case WaveletFamily::Gaussian1: return 5.0;
        case WaveletFamily::FrequencyBSpline: return 20.0;
    }
    return 5.0;
}

std::complex<double> mother_wavelet(WaveletFamily family, double t) {
    switch (family) {
        case WaveletFamily::Gaussian1: {
            // -2 t exp(-t^2), unit L2 norm.
            const double norm = std::sqrt(std::sqrt(kPi / 2.0));
            return {-2.0 * t * std::exp(-t * t) / norm, 0.0};
        }
        case WaveletFamily::ComplexGaussian1: {
            // d/dt [exp(-i t) exp(-t^2)], unit L2 norm.
            const double norm = std::sqrt(2.0 * std::sqrt(kPi / 2.0));
            const double envelope = std::exp(-t * t) / norm;
            return {(-2.0 * t * std::cos(t) - std::sin(t)) * envelope, (2.0 * t * std::sin(t) - std::cos(t)) * envelope};
        }
        case WaveletFamily::FrequencyBSpline: {
            const double envelope =
                std::sqrt(kFbspBandwidth) * std::pow(normalized_sinc(kFbspBandwidth * t / kFbspOrder), kFbspOrder);
            const double phase = 2.0 * kPi * kFbspCentre * t;
            return {envelope * std::cos(phase), envelope * std::sin(phase)};
        }
    }
    return {};
}

void WaveletSpec::validate() const {
    if (!(scale_min > 0.0) || !(scale_max > scale_min))
        throw Error(ErrorKind::Config, "wavelet scales must satisfy 0 < scale_min < scale_max");
    if (n_scales < 2) throw Error(ErrorKind::Config, "n_scales must be >= 2");
}

std::array<WaveletSpec, 6> default_specs() {
    return {{
        {WaveletFamily::ComplexGaussian1, 1.0, 8.0, 16},
        {WaveletFamily::ComplexGaussian1, 8.0, 50.0, 16},
        {WaveletFamily::Gaussian1, 0.6, 6.5, 16},
        {WaveletFamily::Gaussian1, 6.5, 35.0, 16},
        {WaveletFamily::FrequencyBSpline, 1.5, 10.0, 16},
        {WaveletFamily::FrequencyBSpline, 10.0, 40.0, 16},
    }};
}

std::vector<double> scale_grid(const WaveletSpec& spec) {
    spec.validate();
    std::vector<double> scales(static_cast<std::size_t>(spec.n_scales));
    const double step = (spec.scale_max - spec.scale_min) / static_cast<double>(spec.n_scales - 1);
    for (int i = 0; i < spec.n_scales; ++i) scales[i] = spec.scale_min + step * i;
    scales.back() = spec.scale_max;
    return scales;
}

ScaledKernel scaled_kernel(WaveletFamily family, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(ErrorKind::InvalidInput, "scales must be > 0");
    ScaledKernel kernel;
    kernel.half_width = static_cast<std::int64_t>(std::ceil(support_radius(family) * scale));
    kernel.taps.resize(static_cast<std::size_t>(2 * kernel.half_width + 1));
    const double amplitude = 1.0 / std::sqrt(scale);
    for (std::int64_t k = -kernel.half_width; k <= kernel.half_width; ++k) {
        kernel.taps[static_cast<std::size_t>(k + kernel.half_width)] =
            std::conj(mother_wavelet(family, static_cast<double>(k) / scale)) * amplitude;
    }
    return kernel;
}

}  // namespace axle::scalogram
