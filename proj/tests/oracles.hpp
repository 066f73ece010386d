// Independent reference implementations used as test oracles. They are
// written for clarity, not speed, and share no code with the library beyond
// the public enums and the support radius.
#pragma once

#include "axle/peaks.hpp"
#include "axle/scalogram.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
using axle::scalogram::WaveletFamily;

// Unnormalised mother wavelets written from their definitions.
inline cd raw_wavelet(WaveletFamily family, double t) {
    const cd i{0.0, 1.0};
    switch (family) {
        case WaveletFamily::Gaussian1:
            return -2.0 * t * std::exp(-t * t);
        case WaveletFamily::ComplexGaussian1:
            // d/dt of exp(-i t - t^2)
            return (-i - 2.0 * t) * std::exp(-i * t - t * t);
        case WaveletFamily::FrequencyBSpline: {
            // order 1, bandwidth 1.5, centre 1.0; sqrt(fb) sinc(fb t) e^{2 pi i fc t}
            const double x = 1.5 * t;
            const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
            return std::sqrt(1.5) * sinc * std::exp(2.0 * std::numbers::pi * i * t);
        }
    }
    return 0.0;
}

// L2 norm over the real line by a fine midpoint rule.
inline double l2_norm(WaveletFamily family) {
    double sum = 0.0;
    const double h = 1e-4;
    for (double t = -12.0 + h / 2; t < 12.0; t += h) sum += std::norm(raw_wavelet(family, t)) * h;
    return std::sqrt(sum);
}

// Gaussian families are scaled to unit energy; the B-spline wavelet keeps
// its conventional sqrt(fb) amplitude.
inline cd wavelet(WaveletFamily family, double t) {
    static const double n_gaus = l2_norm(WaveletFamily::Gaussian1);
    static const double n_cgau = l2_norm(WaveletFamily::ComplexGaussian1);
    switch (family) {
        case WaveletFamily::Gaussian1: return raw_wavelet(family, t) / n_gaus;
        case WaveletFamily::ComplexGaussian1: return raw_wavelet(family, t) / n_cgau;
        case WaveletFamily::FrequencyBSpline: return raw_wavelet(family, t);
    }
    return 0.0;
}

// c(a, b) = sum_n x[n] conj(psi((n - b) / a)) / sqrt(a), zero outside the
// signal, wavelet truncated at |n - b| <= ceil(R a).
inline std::vector<std::vector<double>> direct_cwt(const std::vector<double>& x, WaveletFamily family,
                                                   const std::vector<double>& scales) {
    const auto n = static_cast<std::int64_t>(x.size());
    const double radius = axle::scalogram::support_radius(family);
    const bool complex_family = family != WaveletFamily::Gaussian1;
    std::vector<std::vector<double>> out(scales.size(), std::vector<double>(x.size()));
    for (std::size_t s = 0; s < scales.size(); ++s) {
        const double a = scales[s];
        const auto half = static_cast<std::int64_t>(std::ceil(radius * a));
        std::vector<cd> taps(static_cast<std::size_t>(2 * half + 1));
        for (std::int64_t k = -half; k <= half; ++k)
            taps[static_cast<std::size_t>(k + half)] = std::conj(wavelet(family, static_cast<double>(k) / a));
        for (std::int64_t b = 0; b < n; ++b) {
            cd acc = 0.0;
            for (std::int64_t m = std::max<std::int64_t>(0, b - half); m <= std::min(n - 1, b + half); ++m)
                acc += x[static_cast<std::size_t>(m)] * taps[static_cast<std::size_t>(m - b + half)];
            acc /= std::sqrt(a);
            out[s][static_cast<std::size_t>(b)] = complex_family ? std::abs(acc) : acc.real();
        }
    }
    return out;
}

// Peak finder written from the textual definition.
inline std::vector<std::int64_t> find_peaks(const std::vector<double>& x, const axle::PeakParams& p) {
    const auto n = static_cast<std::int64_t>(x.size());
    std::vector<std::int64_t> candidates;
    // Strict local maxima including plateaus: a run of equal values whose
    // left and right neighbours are both lower.
    std::int64_t i = 1;
    while (i < n - 1) {
        if (x[i - 1] < x[i]) {
            std::int64_t j = i;
            while (j + 1 < n && x[j + 1] == x[i]) ++j;
            if (j + 1 < n && x[j + 1] < x[i]) candidates.push_back((i + j) / 2);
            i = j + 1;
        } else {
            ++i;
        }
    }
    std::vector<std::int64_t> gated;
    for (auto c : candidates) {
        const double h = x[c];
        if (h < p.min_height) continue;
        // Walk outwards until strictly higher terrain or the edge; the
        // lowest point passed on each side is that side's base.
        double left_min = h;
        for (std::int64_t k = c - 1; k >= 0 && x[k] <= h; --k) left_min = std::min(left_min, x[k]);
        double right_min = h;
        for (std::int64_t k = c + 1; k < n && x[k] <= h; ++k) right_min = std::min(right_min, x[k]);
        if (h - std::max(left_min, right_min) < p.min_prominence) continue;
        gated.push_back(c);
    }
    // Priority: higher first, then lower index. A candidate survives iff no
    // surviving candidate of higher priority lies within min_distance.
    std::vector<std::int64_t> order = gated;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] != x[b] ? x[a] > x[b] : a < b; });
    std::vector<std::int64_t> kept;
    for (auto c : order) {
        bool blocked = false;
        for (auto k : kept) blocked = blocked || std::llabs(k - c) < p.min_distance;
        if (!blocked) kept.push_back(c);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

inline double focal_term(double p, int y, double gamma) {
    p = std::clamp(p, 1e-7, 1.0 - 1e-7);
    const double pt = y == 1 ? p : 1.0 - p;
    return -std::pow(1.0 - pt, gamma) * std::log(pt);
}

}  // namespace oracle
