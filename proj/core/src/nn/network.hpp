#pragma once

#include "axle/random.hpp"
#include "nn/layers.hpp"

#include <memory>
#include <vector>

namespace axle::nn {

struct NetworkShape {
    int depth = 4;
    int base_feature_maps = 16;
    int input_channels = 6;
    int input_scales = 16;
    int kernel_time = 3;
    int kernel_freq = 3;
    float bn_momentum = 0.99F;
    float bn_epsilon = 1e-3F;
};

/// Scratch tensors shared by all blocks; blocks run one at a time.
struct Workspace {
    Tensor affine;
    Tensor grad_pre;
    Tensor grad_affine;
    Tensor grad_a;
    Tensor grad_b;
};

/// Batch norm -> convolution -> ReLU.
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(const std::string& name, int in_channels, int out_channels, int kernel_time, int kernel_freq,
              const NetworkShape& shape);

    void initialize(Rng& rng) { conv_.initialize(rng); }
    void forward(const Tensor& x, bool training, Workspace& ws);
    void backward(const Tensor& dy, Tensor& dx, Workspace& ws);

    [[nodiscard]] const Tensor& output() const { return y_; }
    void release();

    void collect(std::vector<Param*>& params, std::vector<Buffer*>& buffers) {
        bn_.collect(params);
        conv_.collect(params);
        bn_.collect(buffers);
    }

private:
    BatchNorm bn_;
    Conv2d conv_;
    Tensor xhat_;
    Tensor y_;
};

/// Filter path of three blocks (1x1, k x k, 1x1) plus a 1x1 block on the
/// skip path, summed.
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(const std::string& name, int in_channels, int out_channels, const NetworkShape& shape);

    void initialize(Rng& rng);
    void forward(const Tensor& x, bool training, Workspace& ws);
    void backward(const Tensor& dy, Tensor& dx, Workspace& ws);

    [[nodiscard]] const Tensor& output() const { return y_; }
    void release();

    void collect(std::vector<Param*>& params, std::vector<Buffer*>& buffers);

private:
    ConvBlock reduce_;
    ConvBlock spatial_;
    ConvBlock expand_;
    ConvBlock skip_;
    Tensor y_;
    Tensor grad_filter_;
    Tensor grad_mid_;
};

/// Shapes observed during the most recent forward pass.
struct ForwardTrace {
    std::int64_t input_time = 0;
    std::int64_t bottleneck_time = 0;
    int bottleneck_freq = 0;
    int bottleneck_channels = 0;
};

class Network {
public:
    explicit Network(const NetworkShape& shape);
    ~Network();
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    void initialize(std::uint64_t seed);

    /// `input` is [batch][input_channels][time][input_scales] with time a
    /// multiple of 2^depth. Returns logits [batch][1][time][1].
    const Tensor& forward(const Tensor& input, bool training);
    /// Gradient of the loss w.r.t. the logits of the last forward pass.
    void backward(const Tensor& grad_logits);

    /// Drops cached activations to free memory.
    void release();

    [[nodiscard]] const std::vector<Param*>& params() const { return params_; }
    [[nodiscard]] const std::vector<Buffer*>& buffers() const { return buffers_; }
    [[nodiscard]] const ForwardTrace& trace() const { return trace_; }
    [[nodiscard]] const NetworkShape& shape() const { return shape_; }

private:
    struct Encoder;
    struct Decoder;

    NetworkShape shape_;
    std::vector<std::unique_ptr<Encoder>> encoders_;
    std::unique_ptr<ConvBlock> bottleneck_block_;
    std::unique_ptr<ResidualBlock> bottleneck_residual_;
    std::vector<std::unique_ptr<Decoder>> decoders_;  // deepest first
    Conv2d head_;
    Tensor head_input_grad_;
    Tensor logits_;
    Workspace ws_;
    ForwardTrace trace_;
    std::vector<Param*> params_;
    std::vector<Buffer*> buffers_;
};

}  // namespace axle::nn
