#include "axle/scalogram.hpp"

#include "axle/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <string>

namespace axle::scalogram {

namespace {

// The FFTW planner is not re-entrant; execution is.
std::mutex& planner_mutex() {
    static std::mutex mutex;
    return mutex;
}

struct FftwBuffer {
    explicit FftwBuffer(std::size_t n)
        : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))), size(n) {
        if (data == nullptr) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(data); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;

    fftw_complex* data;
    std::size_t size;
};

class FftPlan {
public:
    FftPlan(FftwBuffer& in, FftwBuffer& out, int sign) {
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(in.size), in.data, out.data, sign, FFTW_ESTIMATE);
        if (plan_ == nullptr) throw Error(ErrorKind::InvalidInput, "could not create FFT plan");
    }
    ~FftPlan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    void execute(FftwBuffer& in, FftwBuffer& out) const { fftw_execute_dft(plan_, in.data, out.data); }

private:
    fftw_plan plan_ = nullptr;
};

/// Smallest n >= target whose only prime factors are 2, 3, 5 and 7.
std::size_t fast_fft_size(std::size_t target) {
    for (std::size_t n = std::max<std::size_t>(target, 1);; ++n) {
        std::size_t m = n;
        for (std::size_t p : {2, 3, 5, 7}) {
            while (m % p == 0) m /= p;
        }
        if (m == 1) return n;
    }
}

}  // namespace

Matrix cwt(std::span<const double> signal, WaveletFamily family, std::span<const double> scales) {
    const auto n = static_cast<std::int64_t>(signal.size());
    for (double v : signal) {
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "signal contains non-finite values");
    }
    Matrix result = Matrix::Zero(static_cast<Eigen::Index>(scales.size()), n);
    if (n == 0 || scales.empty()) return result;

    std::vector<ScaledKernel> kernels;
    kernels.reserve(scales.size());
    std::int64_t max_half_width = 0;
    for (double scale : scales) {
        kernels.push_back(scaled_kernel(family, scale));
        const auto taps = static_cast<std::int64_t>(kernels.back().taps.size());
        if (taps > 10 * n)
            throw Error(ErrorKind::ScaleTooLarge, "scale " + std::to_string(scale) + " needs " + std::to_string(taps) +
                                                      " taps for a signal of " + std::to_string(n) + " samples");
        max_half_width = std::max(max_half_width, kernels.back().half_width);
    }

    const std::size_t fft_size = fast_fft_size(static_cast<std::size_t>(n + 2 * max_half_width));
    FftwBuffer time(fft_size);
    FftwBuffer signal_spectrum(fft_size);
    FftwBuffer kernel_spectrum(fft_size);
    FftPlan forward(time, signal_spectrum, FFTW_FORWARD);
    FftPlan backward(kernel_spectrum, time, FFTW_BACKWARD);

    for (std::size_t i = 0; i < fft_size; ++i) {
        time.data[i][0] = i < static_cast<std::size_t>(n) ? signal[i] : 0.0;
        time.data[i][1] = 0.0;
    }
    forward.execute(time, signal_spectrum);

    const bool complex_family = is_complex(family);
    const double inverse_size = 1.0 / static_cast<double>(fft_size);
    for (std::size_t row = 0; row < kernels.size(); ++row) {
        const auto& kernel = kernels[row];
        const auto half = kernel.half_width;
        // Correlation with the taps equals convolution with the reversed taps;
        // the reversed kernel is stored circularly so that output b lines up
        // with input b.
        std::fill_n(&time.data[0][0], 2 * fft_size, 0.0);
        for (std::int64_t k = -half; k <= half; ++k) {
            const auto& tap = kernel.taps[static_cast<std::size_t>(k + half)];
            const auto pos = static_cast<std::size_t>((static_cast<std::int64_t>(fft_size) - k) %
                                                      static_cast<std::int64_t>(fft_size));
            time.data[pos][0] = tap.real();
            time.data[pos][1] = tap.imag();
        }
        forward.execute(time, kernel_spectrum);
        for (std::size_t i = 0; i < fft_size; ++i) {
            const std::complex<double> a(signal_spectrum.data[i][0], signal_spectrum.data[i][1]);
            const std::complex<double> b(kernel_spectrum.data[i][0], kernel_spectrum.data[i][1]);
            const auto product = a * b;
            kernel_spectrum.data[i][0] = product.real();
            kernel_spectrum.data[i][1] = product.imag();
        }
        backward.execute(kernel_spectrum, time);
        for (std::int64_t b = 0; b < n; ++b) {
            const std::complex<double> c(time.data[b][0] * inverse_size, time.data[b][1] * inverse_size);
            result(static_cast<Eigen::Index>(row), b) = complex_family ? std::abs(c) : c.real();
        }
    }
    return result;
}

Matrix normalize(const Matrix& m) {
    if (m.size() == 0) return m;
    if (!m.allFinite()) throw Error(ErrorKind::InvalidInput, "matrix contains non-finite values");
    const double lo = m.minCoeff();
    const double hi = m.maxCoeff();
    if (!(hi > lo)) return Matrix::Zero(m.rows(), m.cols());
    return ((m.array() - lo) / (hi - lo)).matrix();
}

Scalogram::Scalogram(std::int64_t n_samples, int n_scales, int n_transforms, std::int64_t window_start)
    : n_samples_(n_samples),
      n_scales_(n_scales),
      n_transforms_(n_transforms),
      window_start_(window_start),
      data_(static_cast<std::size_t>(n_samples) * static_cast<std::size_t>(n_scales) *
                static_cast<std::size_t>(n_transforms),
            0.0F) {
    if (n_samples < 0 || n_scales < 0 || n_transforms < 0)
        throw Error(ErrorKind::InvalidInput, "scalogram dimensions must be non-negative");
}

Window axle_window(std::int64_t first_crossing, std::int64_t last_crossing, std::int64_t n_samples) {
    return {std::max<std::int64_t>(0, first_crossing - kSamplesBeforeFirstAxle),
            std::min<std::int64_t>(n_samples, last_crossing + kSamplesAfterLastAxle + 1)};
}

Scalogram build_scalogram(std::span<const double> signal, std::span<const WaveletSpec> specs,
                          std::int64_t window_start) {
    if (specs.empty()) throw Error(ErrorKind::Config, "at least one wavelet setting required");
    const int n_scales = specs.front().n_scales;
    for (const auto& spec : specs) {
        spec.validate();
        if (spec.n_scales != n_scales) throw Error(ErrorKind::Config, "all wavelet settings need the same scale count");
    }
    const auto n = static_cast<std::int64_t>(signal.size());
    Scalogram out(n, n_scales, static_cast<int>(specs.size()), window_start);
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const auto scales = scale_grid(specs[k]);
        const Matrix channel = normalize(cwt(signal, specs[k].family, scales));
        for (std::int64_t t = 0; t < n; ++t) {
            for (int f = 0; f < n_scales; ++f) out.at(t, f, static_cast<int>(k)) = static_cast<float>(channel(f, t));
        }
    }
    return out;
}

TransformedWindow transform_passage(const PassageRecord& passage, const LabelSet& labels, int sensor,
                                    std::span<const WaveletSpec> specs) {
    if (sensor < 0 || sensor >= passage.n_sensors())
        throw Error(ErrorKind::InvalidInput, "sensor index " + std::to_string(sensor) + " out of range");
    if (labels.n_axles() == 0) throw Error(ErrorKind::InvalidInput, "passage '" + passage.id + "' has no axles");
    if (labels.crossing_indices.cols() != passage.n_sensors())
        throw Error(ErrorKind::InvalidInput, "labels and passage disagree on the sensor count");

    const auto column = labels.crossing_indices.col(sensor);
    const auto window = axle_window(column.minCoeff(), column.maxCoeff(), passage.n_samples());
    if (window.length() < kMinWindowLength)
        throw Error(ErrorKind::WindowTooShort, "window of " + std::to_string(window.length()) + " samples");

    const std::span<const double> slice(passage.accel.col(sensor).data() + window.start,
                                        static_cast<std::size_t>(window.length()));
    TransformedWindow out;
    out.scalogram = build_scalogram(slice, specs, window.start);
    out.window_start = window.start;
    out.target.assign(static_cast<std::size_t>(window.length()), 0);
    for (Eigen::Index a = 0; a < column.size(); ++a) {
        const auto local = column(a) - window.start;
        if (local >= 0 && local < window.length()) out.target[static_cast<std::size_t>(local)] = 1;
    }
    return out;
}

}  // namespace axle::scalogram
