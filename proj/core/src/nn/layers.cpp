#include "nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace axle::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void glorot_uniform(FloatBuffer& w, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (float& v : w) v = static_cast<float>(rng.uniform(-limit, limit));
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel_time, int kernel_freq)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_time_(kernel_time), kernel_freq_(kernel_freq) {
    weight_.init(name + ".weight", static_cast<std::size_t>(out_channels) * static_cast<std::size_t>(in_channels) *
                                       static_cast<std::size_t>(kernel_time) * static_cast<std::size_t>(kernel_freq));
    bias_.init(name + ".bias", static_cast<std::size_t>(out_channels));
}

void Conv2d::initialize(Rng& rng) {
    const int area = kernel_time_ * kernel_freq_;
    glorot_uniform(weight_.value, in_channels_ * area, out_channels_ * area, rng);
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0F);
}

std::vector<std::pair<int, int>> Conv2d::active_taps(std::int64_t time, int freq) const {
    std::vector<std::pair<int, int>> taps;
    for (int kt = 0; kt < kernel_time_; ++kt) {
        const int dt = kt - kernel_time_ / 2;
        if (std::abs(dt) >= time) continue;
        for (int kf = 0; kf < kernel_freq_; ++kf) {
            const int df = kf - kernel_freq_ / 2;
            if (std::abs(df) >= freq) continue;
            taps.emplace_back(dt, df);
        }
    }
    return taps;
}

void Conv2d::gather_weights(const std::vector<std::pair<int, int>>& taps) {
    const auto n_taps = taps.size();
    active_weight_.resize(static_cast<std::size_t>(out_channels_) * static_cast<std::size_t>(in_channels_) * n_taps);
    for (int o = 0; o < out_channels_; ++o) {
        for (int c = 0; c < in_channels_; ++c) {
            for (std::size_t k = 0; k < n_taps; ++k) {
                const int kt = taps[k].first + kernel_time_ / 2;
                const int kf = taps[k].second + kernel_freq_ / 2;
                active_weight_[(static_cast<std::size_t>(o) * in_channels_ + c) * n_taps + k] =
                    weight_.value[((static_cast<std::size_t>(o) * in_channels_ + c) * kernel_time_ + kt) * kernel_freq_ + kf];
            }
        }
    }
}

void Conv2d::im2col(const float* x, std::int64_t time, int freq, const std::vector<std::pair<int, int>>& taps) {
    const auto plane = static_cast<std::size_t>(time) * static_cast<std::size_t>(freq);
    col_.resize(static_cast<std::size_t>(in_channels_) * taps.size() * plane);
    float* dst = col_.data();
    for (int c = 0; c < in_channels_; ++c) {
        const float* src = x + static_cast<std::size_t>(c) * plane;
        for (const auto& [dt, df] : taps) {
            const int f_lo = std::max(0, -df);
            const int f_hi = std::min(freq, freq - df);
            for (std::int64_t t = 0; t < time; ++t) {
                float* row = dst + static_cast<std::size_t>(t) * freq;
                const std::int64_t ts = t + dt;
                if (ts < 0 || ts >= time) {
                    std::fill_n(row, freq, 0.0F);
                    continue;
                }
                const float* src_row = src + static_cast<std::size_t>(ts) * freq;
                std::fill_n(row, f_lo, 0.0F);
                std::memcpy(row + f_lo, src_row + f_lo + df, sizeof(float) * static_cast<std::size_t>(f_hi - f_lo));
                std::fill(row + f_hi, row + freq, 0.0F);
            }
            dst += plane;
        }
    }
}

void Conv2d::col2im(float* dx, std::int64_t time, int freq, const std::vector<std::pair<int, int>>& taps) const {
    const auto plane = static_cast<std::size_t>(time) * static_cast<std::size_t>(freq);
    const float* src = dcol_.data();
    for (int c = 0; c < in_channels_; ++c) {
        float* dst = dx + static_cast<std::size_t>(c) * plane;
        for (const auto& [dt, df] : taps) {
            const int f_lo = std::max(0, -df);
            const int f_hi = std::min(freq, freq - df);
            for (std::int64_t t = 0; t < time; ++t) {
                const std::int64_t ts = t + dt;
                if (ts < 0 || ts >= time) continue;
                const float* row = src + static_cast<std::size_t>(t) * freq;
                float* dst_row = dst + static_cast<std::size_t>(ts) * freq;
                for (int f = f_lo; f < f_hi; ++f) dst_row[f + df] += row[f];
            }
            src += plane;
        }
    }
}

void Conv2d::forward(const Tensor& x, Tensor& y) {
    y.reshape(x.batch, out_channels_, x.time, x.freq);
    y.lengths = x.lengths;
    const auto n = static_cast<Eigen::Index>(x.plane());
    const bool pointwise = kernel_time_ == 1 && kernel_freq_ == 1;
    const auto taps = active_taps(x.time, x.freq);
    const auto k = static_cast<Eigen::Index>(in_channels_ * static_cast<int>(taps.size()));
    gather_weights(taps);
    ConstMapMat w(active_weight_.data(), out_channels_, k);
    Eigen::Map<const Eigen::VectorXf> b(bias_.value.data(), out_channels_);
    for (int i = 0; i < x.batch; ++i) {
        const float* cols = x.item(i);
        if (!pointwise) {
            im2col(x.item(i), x.time, x.freq, taps);
            cols = col_.data();
        }
        MapMat out(y.item(i), out_channels_, n);
        out.noalias() = w * ConstMapMat(cols, k, n);
        out.colwise() += b;
    }
}

void Conv2d::backward(const Tensor& x, const Tensor& dy, Tensor* dx) {
    const auto n = static_cast<Eigen::Index>(x.plane());
    const bool pointwise = kernel_time_ == 1 && kernel_freq_ == 1;
    const auto taps = active_taps(x.time, x.freq);
    const auto k = static_cast<Eigen::Index>(in_channels_ * static_cast<int>(taps.size()));
    gather_weights(taps);
    ConstMapMat w(active_weight_.data(), out_channels_, k);
    active_grad_.assign(active_weight_.size(), 0.0F);
    MapMat dw(active_grad_.data(), out_channels_, k);
    Eigen::Map<Eigen::VectorXf> db(bias_.grad.data(), out_channels_);

    if (dx != nullptr) {
        if (pointwise) {
            dx->reshape(x.batch, in_channels_, x.time, x.freq);
        } else {
            dx->resize(x.batch, in_channels_, x.time, x.freq);  // col2im accumulates
        }
        dx->lengths = x.lengths;
    }
    for (int i = 0; i < x.batch; ++i) {
        ConstMapMat g(dy.item(i), out_channels_, n);
        const float* cols = x.item(i);
        if (!pointwise) {
            im2col(x.item(i), x.time, x.freq, taps);
            cols = col_.data();
        }
        dw.noalias() += g * ConstMapMat(cols, k, n).transpose();
        db += g.rowwise().sum();
        if (dx == nullptr) continue;
        if (pointwise) {
            MapMat(dx->item(i), k, n).noalias() = w.transpose() * g;
        } else {
            dcol_.resize(static_cast<std::size_t>(k) * static_cast<std::size_t>(n));
            MapMat(dcol_.data(), k, n).noalias() = w.transpose() * g;
            col2im(dx->item(i), x.time, x.freq, taps);
        }
    }

    const auto n_taps = taps.size();
    for (int o = 0; o < out_channels_; ++o) {
        for (int c = 0; c < in_channels_; ++c) {
            for (std::size_t t = 0; t < n_taps; ++t) {
                const int kt = taps[t].first + kernel_time_ / 2;
                const int kf = taps[t].second + kernel_freq_ / 2;
                weight_.grad[((static_cast<std::size_t>(o) * in_channels_ + c) * kernel_time_ + kt) * kernel_freq_ + kf] +=
                    active_grad_[(static_cast<std::size_t>(o) * in_channels_ + c) * n_taps + t];
            }
        }
    }
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(const std::string& name, int channels, float momentum, float epsilon)
    : channels_(channels), momentum_(momentum), epsilon_(epsilon) {
    gamma_.init(name + ".gamma", static_cast<std::size_t>(channels));
    std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0F);
    beta_.init(name + ".beta", static_cast<std::size_t>(channels));
    running_mean_ = {name + ".running_mean", FloatBuffer(static_cast<std::size_t>(channels), 0.0F)};
    running_var_ = {name + ".running_var", FloatBuffer(static_cast<std::size_t>(channels), 1.0F)};
}

void BatchNorm::normalize(const Tensor& x, Tensor& xhat, bool training) {
    xhat.reshape(x.batch, x.channels, x.time, x.freq);
    xhat.lengths = x.lengths;
    inv_std_.assign(static_cast<std::size_t>(channels_), 0.0F);
    const auto freq = static_cast<std::size_t>(x.freq);

    for (int c = 0; c < channels_; ++c) {
        double mean;
        double var;
        if (training) {
            double sum = 0.0;
            double count = 0.0;
            for (int b = 0; b < x.batch; ++b) {
                const float* p = x.channel(b, c);
                const auto valid = static_cast<std::size_t>(x.lengths[b]) * freq;
                for (std::size_t i = 0; i < valid; ++i) sum += p[i];
                count += static_cast<double>(valid);
            }
            mean = sum / count;
            double sq = 0.0;
            for (int b = 0; b < x.batch; ++b) {
                const float* p = x.channel(b, c);
                const auto valid = static_cast<std::size_t>(x.lengths[b]) * freq;
                for (std::size_t i = 0; i < valid; ++i) {
                    const double d = p[i] - mean;
                    sq += d * d;
                }
            }
            var = sq / count;
            const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
            running_mean_.value[c] = static_cast<float>(momentum_ * running_mean_.value[c] + (1.0 - momentum_) * mean);
            running_var_.value[c] = static_cast<float>(momentum_ * running_var_.value[c] + (1.0 - momentum_) * unbiased);
        } else {
            mean = running_mean_.value[c];
            var = running_var_.value[c];
        }
        const auto inv = static_cast<float>(1.0 / std::sqrt(var + epsilon_));
        const auto m = static_cast<float>(mean);
        inv_std_[c] = inv;
        for (int b = 0; b < x.batch; ++b) {
            const float* p = x.channel(b, c);
            float* q = xhat.channel(b, c);
            for (std::size_t i = 0; i < x.plane(); ++i) q[i] = (p[i] - m) * inv;
        }
    }
}

void BatchNorm::affine(const Tensor& xhat, Tensor& y) const {
    y.reshape(xhat.batch, xhat.channels, xhat.time, xhat.freq);
    y.lengths = xhat.lengths;
    for (int b = 0; b < xhat.batch; ++b) {
        for (int c = 0; c < channels_; ++c) {
            const float g = gamma_.value[c];
            const float be = beta_.value[c];
            const float* p = xhat.channel(b, c);
            float* q = y.channel(b, c);
            for (std::size_t i = 0; i < xhat.plane(); ++i) q[i] = g * p[i] + be;
        }
    }
}

void BatchNorm::backward(const Tensor& xhat, const Tensor& dy, Tensor& dx) {
    dx.reshape(xhat.batch, xhat.channels, xhat.time, xhat.freq);
    dx.lengths = xhat.lengths;
    const auto freq = static_cast<std::size_t>(xhat.freq);
    for (int c = 0; c < channels_; ++c) {
        // Statistics depend on the valid positions only, but every position's
        // output depends on the statistics.
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        double count = 0.0;
        for (int b = 0; b < xhat.batch; ++b) {
            const float* g = dy.channel(b, c);
            const float* h = xhat.channel(b, c);
            for (std::size_t i = 0; i < xhat.plane(); ++i) {
                sum_dy += g[i];
                sum_dy_xhat += static_cast<double>(g[i]) * h[i];
            }
            count += static_cast<double>(static_cast<std::size_t>(xhat.lengths[b]) * freq);
        }
        gamma_.grad[c] += static_cast<float>(sum_dy_xhat);
        beta_.grad[c] += static_cast<float>(sum_dy);

        const float gamma = gamma_.value[c];
        const auto scale = gamma * inv_std_[c];
        const auto mean_term = static_cast<float>(sum_dy / count);
        const auto var_term = static_cast<float>(sum_dy_xhat / count);
        for (int b = 0; b < xhat.batch; ++b) {
            const float* g = dy.channel(b, c);
            const float* h = xhat.channel(b, c);
            float* d = dx.channel(b, c);
            const auto valid = static_cast<std::size_t>(xhat.lengths[b]) * freq;
            for (std::size_t i = 0; i < valid; ++i) d[i] = scale * (g[i] - mean_term - h[i] * var_term);
            for (std::size_t i = valid; i < xhat.plane(); ++i) d[i] = scale * g[i];
        }
    }
}

// ---------------------------------------------------------------- MaxPool2x2

void MaxPool2x2::forward(const Tensor& x, Tensor& y) {
    in_batch_ = x.batch;
    in_channels_ = x.channels;
    in_time_ = x.time;
    in_freq_ = x.freq;
    in_lengths_ = x.lengths;
    const std::int64_t out_time = x.time / 2;
    const int out_freq = x.freq / 2;
    y.reshape(x.batch, x.channels, out_time, out_freq);
    y.lengths.resize(x.lengths.size());
    for (std::size_t b = 0; b < x.lengths.size(); ++b) y.lengths[b] = (x.lengths[b] + 1) / 2;
    argmax_.assign(y.data.size(), 0);

    std::size_t out_index = 0;
    for (int b = 0; b < x.batch; ++b) {
        for (int c = 0; c < x.channels; ++c) {
            const float* p = x.channel(b, c);
            for (std::int64_t t = 0; t < out_time; ++t) {
                const float* r0 = p + static_cast<std::size_t>(2 * t) * x.freq;
                const float* r1 = r0 + x.freq;
                for (int f = 0; f < out_freq; ++f, ++out_index) {
                    const float candidates[4] = {r0[2 * f], r0[2 * f + 1], r1[2 * f], r1[2 * f + 1]};
                    std::uint8_t best = 0;
                    for (std::uint8_t k = 1; k < 4; ++k) {
                        if (candidates[k] > candidates[best]) best = k;
                    }
                    y.data[out_index] = candidates[best];
                    argmax_[out_index] = best;
                }
            }
        }
    }
}

void MaxPool2x2::backward(const Tensor& dy, Tensor& dx) const {
    dx.resize(in_batch_, in_channels_, in_time_, in_freq_);
    dx.lengths = in_lengths_;
    std::size_t out_index = 0;
    for (int b = 0; b < in_batch_; ++b) {
        for (int c = 0; c < in_channels_; ++c) {
            float* p = dx.channel(b, c);
            for (std::int64_t t = 0; t < dy.time; ++t) {
                for (int f = 0; f < dy.freq; ++f, ++out_index) {
                    const std::uint8_t k = argmax_[out_index];
                    const std::int64_t tt = 2 * t + (k >> 1);
                    const int ff = 2 * f + (k & 1);
                    p[static_cast<std::size_t>(tt) * in_freq_ + ff] += dy.data[out_index];
                }
            }
        }
    }
}

// ---------------------------------------------------------------- TimeUpsample

TimeUpsample::TimeUpsample(const std::string& name, int in_channels, int out_channels)
    : in_channels_(in_channels), out_channels_(out_channels) {
    weight_.init(name + ".weight",
                 static_cast<std::size_t>(kKernel) * static_cast<std::size_t>(out_channels) * static_cast<std::size_t>(in_channels));
    bias_.init(name + ".bias", static_cast<std::size_t>(out_channels));
}

void TimeUpsample::initialize(Rng& rng) {
    glorot_uniform(weight_.value, in_channels_ * kKernel, out_channels_ * kKernel, rng);
    std::fill(bias_.value.begin(), bias_.value.end(), 0.0F);
}

// Output time o = 2 * i + k for input time i and kernel tap k; taps landing
// past the end are dropped ("same" padding, all padding after).
void TimeUpsample::forward(const Tensor& x, Tensor& y) {
    const std::int64_t out_time = 2 * x.time;
    y.resize(x.batch, out_channels_, out_time, x.freq);
    y.lengths.resize(x.lengths.size());
    for (std::size_t b = 0; b < x.lengths.size(); ++b) y.lengths[b] = 2 * x.lengths[b];
    const auto n = static_cast<Eigen::Index>(x.plane());
    const auto freq = static_cast<std::size_t>(x.freq);
    z_.resize(static_cast<std::size_t>(out_channels_) * static_cast<std::size_t>(n));
    for (int b = 0; b < x.batch; ++b) {
        ConstMapMat in(x.item(b), in_channels_, n);
        for (int k = 0; k < kKernel; ++k) {
            ConstMapMat w(weight_.value.data() + static_cast<std::size_t>(k) * out_channels_ * in_channels_,
                          out_channels_, in_channels_);
            MapMat(z_.data(), out_channels_, n).noalias() = w * in;
            for (int o = 0; o < out_channels_; ++o) {
                const float* src = z_.data() + static_cast<std::size_t>(o) * n;
                float* dst = y.channel(b, o);
                for (std::int64_t i = 0; i < x.time; ++i) {
                    const std::int64_t t = 2 * i + k;
                    if (t >= out_time) break;
                    float* row = dst + static_cast<std::size_t>(t) * freq;
                    const float* src_row = src + static_cast<std::size_t>(i) * freq;
                    for (std::size_t f = 0; f < freq; ++f) row[f] += src_row[f];
                }
            }
        }
        for (int o = 0; o < out_channels_; ++o) {
            float* dst = y.channel(b, o);
            const float bias = bias_.value[o];
            for (std::size_t i = 0; i < y.plane(); ++i) dst[i] += bias;
        }
    }
}

void TimeUpsample::backward(const Tensor& x, const Tensor& dy, Tensor& dx) {
    dx.resize(x.batch, in_channels_, x.time, x.freq);
    dx.lengths = x.lengths;
    const auto n = static_cast<Eigen::Index>(x.plane());
    const auto freq = static_cast<std::size_t>(x.freq);
    z_.resize(static_cast<std::size_t>(out_channels_) * static_cast<std::size_t>(n));
    for (int b = 0; b < x.batch; ++b) {
        ConstMapMat in(x.item(b), in_channels_, n);
        MapMat din(dx.item(b), in_channels_, n);
        for (int o = 0; o < out_channels_; ++o) {
            const float* g = dy.channel(b, o);
            double sum = 0.0;
            for (std::size_t i = 0; i < dy.plane(); ++i) sum += g[i];
            bias_.grad[o] += static_cast<float>(sum);
        }
        for (int k = 0; k < kKernel; ++k) {
            for (int o = 0; o < out_channels_; ++o) {
                const float* g = dy.channel(b, o);
                float* dst = z_.data() + static_cast<std::size_t>(o) * n;
                for (std::int64_t i = 0; i < x.time; ++i) {
                    const std::int64_t t = 2 * i + k;
                    float* row = dst + static_cast<std::size_t>(i) * freq;
                    if (t >= dy.time) {
                        std::fill_n(row, freq, 0.0F);
                    } else {
                        std::memcpy(row, g + static_cast<std::size_t>(t) * freq, sizeof(float) * freq);
                    }
                }
            }
            ConstMapMat gz(z_.data(), out_channels_, n);
            const auto offset = static_cast<std::size_t>(k) * out_channels_ * in_channels_;
            ConstMapMat w(weight_.value.data() + offset, out_channels_, in_channels_);
            MapMat dw(weight_.grad.data() + offset, out_channels_, in_channels_);
            dw.noalias() += gz * in.transpose();
            din.noalias() += w.transpose() * gz;
        }
    }
}

// ---------------------------------------------------------------- shape ops

void fold_frequency(const Tensor& x, Tensor& y) {
    y.reshape(x.batch, x.channels * x.freq, x.time, 1);
    y.lengths = x.lengths;
    for (int b = 0; b < x.batch; ++b) {
        for (int c = 0; c < x.channels; ++c) {
            const float* src = x.channel(b, c);
            for (int f = 0; f < x.freq; ++f) {
                float* dst = y.channel(b, c * x.freq + f);
                for (std::int64_t t = 0; t < x.time; ++t) dst[t] = src[static_cast<std::size_t>(t) * x.freq + f];
            }
        }
    }
}

void unfold_frequency_grad(const Tensor& dy, int channels, int freq, Tensor& dx) {
    dx.reshape(dy.batch, channels, dy.time, freq);
    dx.lengths = dy.lengths;
    for (int b = 0; b < dy.batch; ++b) {
        for (int c = 0; c < channels; ++c) {
            float* dst = dx.channel(b, c);
            for (int f = 0; f < freq; ++f) {
                const float* src = dy.channel(b, c * freq + f);
                for (std::int64_t t = 0; t < dy.time; ++t) dst[static_cast<std::size_t>(t) * freq + f] = src[t];
            }
        }
    }
}

void concat_channels(const Tensor& a, const Tensor& b, Tensor& y) {
    y.reshape(a.batch, a.channels + b.channels, a.time, a.freq);
    y.lengths = a.lengths;
    for (int i = 0; i < a.batch; ++i) {
        std::copy_n(a.item(i), a.item_size(), y.item(i));
        std::copy_n(b.item(i), b.item_size(), y.item(i) + a.item_size());
    }
}

void split_channels_grad(const Tensor& dy, int channels_a, Tensor& da, Tensor& db) {
    da.reshape(dy.batch, channels_a, dy.time, dy.freq);
    db.reshape(dy.batch, dy.channels - channels_a, dy.time, dy.freq);
    da.lengths = dy.lengths;
    db.lengths = dy.lengths;
    for (int i = 0; i < dy.batch; ++i) {
        std::copy_n(dy.item(i), da.item_size(), da.item(i));
        std::copy_n(dy.item(i) + da.item_size(), db.item_size(), db.item(i));
    }
}

}  // namespace axle::nn
