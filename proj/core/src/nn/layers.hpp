#pragma once

#include "axle/random.hpp"
#include "nn/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace axle::nn {

/// 2-D convolution over (time, freq) with "same" zero padding and stride 1.
/// Kernel taps that can only ever see padding for the current input shape
/// (e.g. the outer frequency rows when freq == 1) are skipped.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(const std::string& name, int in_channels, int out_channels, int kernel_time, int kernel_freq);

    void initialize(Rng& rng);
    void forward(const Tensor& x, Tensor& y);
    /// `x` is the tensor seen by forward. `dx` may be null for input layers.
    void backward(const Tensor& x, const Tensor& dy, Tensor* dx);

    void collect(std::vector<Param*>& out) {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    [[nodiscard]] int in_channels() const { return in_channels_; }
    [[nodiscard]] int out_channels() const { return out_channels_; }

private:
    std::vector<std::pair<int, int>> active_taps(std::int64_t time, int freq) const;
    void gather_weights(const std::vector<std::pair<int, int>>& taps);
    void im2col(const float* x, std::int64_t time, int freq, const std::vector<std::pair<int, int>>& taps);
    void col2im(float* dx, std::int64_t time, int freq, const std::vector<std::pair<int, int>>& taps) const;

    int in_channels_ = 0;
    int out_channels_ = 0;
    int kernel_time_ = 1;
    int kernel_freq_ = 1;
    Param weight_;  // [out][in][kernel_time][kernel_freq]
    Param bias_;    // [out]

    FloatBuffer active_weight_;  // [out][in * taps]
    FloatBuffer active_grad_;
    FloatBuffer col_;
    FloatBuffer dcol_;
};

/// Per-channel batch normalisation. Statistics are taken over the valid
/// (unpadded) time steps of the whole batch while training and from running
/// averages otherwise.
class BatchNorm {
public:
    BatchNorm() = default;
    BatchNorm(const std::string& name, int channels, float momentum, float epsilon);

    /// Writes the normalised (pre-affine) values to `xhat`.
    void normalize(const Tensor& x, Tensor& xhat, bool training);
    /// y = gamma * xhat + beta
    void affine(const Tensor& xhat, Tensor& y) const;
    /// `dy` is the gradient w.r.t. the affine output.
    void backward(const Tensor& xhat, const Tensor& dy, Tensor& dx);

    void collect(std::vector<Param*>& out) {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }
    void collect(std::vector<Buffer*>& out) {
        out.push_back(&running_mean_);
        out.push_back(&running_var_);
    }

private:
    int channels_ = 0;
    float momentum_ = 0.99F;
    float epsilon_ = 1e-3F;
    Param gamma_;
    Param beta_;
    Buffer running_mean_;
    Buffer running_var_;
    FloatBuffer inv_std_;
};

class MaxPool2x2 {
public:
    void forward(const Tensor& x, Tensor& y);
    void backward(const Tensor& dy, Tensor& dx) const;

private:
    std::vector<std::uint8_t> argmax_;
    int in_channels_ = 0;
    std::int64_t in_time_ = 0;
    int in_freq_ = 0;
    int in_batch_ = 0;
    std::vector<std::int64_t> in_lengths_;
};

/// Transposed convolution with a (3 x 1) kernel and stride (2 x 1): doubles
/// the time axis and leaves frequency untouched.
class TimeUpsample {
public:
    TimeUpsample() = default;
    TimeUpsample(const std::string& name, int in_channels, int out_channels);

    void initialize(Rng& rng);
    void forward(const Tensor& x, Tensor& y);
    void backward(const Tensor& x, const Tensor& dy, Tensor& dx);

    void collect(std::vector<Param*>& out) {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    static constexpr int kKernel = 3;

private:
    int in_channels_ = 0;
    int out_channels_ = 0;
    Param weight_;  // [kernel][out][in]
    Param bias_;    // [out]
    FloatBuffer z_;
};

/// Folds the frequency axis into channels: (C, T, F) -> (C * F, T, 1).
void fold_frequency(const Tensor& x, Tensor& y);
void unfold_frequency_grad(const Tensor& dy, int channels, int freq, Tensor& dx);

void concat_channels(const Tensor& a, const Tensor& b, Tensor& y);
void split_channels_grad(const Tensor& dy, int channels_a, Tensor& da, Tensor& db);

}  // namespace axle::nn
