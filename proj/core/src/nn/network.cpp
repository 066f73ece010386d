#include "nn/network.hpp"

#include <algorithm>
#include <string>

namespace axle::nn {

// ---------------------------------------------------------------- ConvBlock

ConvBlock::ConvBlock(const std::string& name, int in_channels, int out_channels, int kernel_time, int kernel_freq,
                     const NetworkShape& shape)
    : bn_(name + ".bn", in_channels, shape.bn_momentum, shape.bn_epsilon),
      conv_(name + ".conv", in_channels, out_channels, kernel_time, kernel_freq) {}

void ConvBlock::forward(const Tensor& x, bool training, Workspace& ws) {
    bn_.normalize(x, xhat_, training);
    bn_.affine(xhat_, ws.affine);
    conv_.forward(ws.affine, y_);
    for (float& v : y_.data) v = std::max(v, 0.0F);
}

void ConvBlock::backward(const Tensor& dy, Tensor& dx, Workspace& ws) {
    ws.grad_pre.reshape(dy.batch, dy.channels, dy.time, dy.freq);
    ws.grad_pre.lengths = dy.lengths;
    for (std::size_t i = 0; i < dy.data.size(); ++i) ws.grad_pre.data[i] = y_.data[i] > 0.0F ? dy.data[i] : 0.0F;
    bn_.affine(xhat_, ws.affine);
    conv_.backward(ws.affine, ws.grad_pre, &ws.grad_affine);
    bn_.backward(xhat_, ws.grad_affine, dx);
}

void ConvBlock::release() {
    xhat_ = {};
    y_ = {};
}

// ---------------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(const std::string& name, int in_channels, int out_channels, const NetworkShape& shape)
    : reduce_(name + ".filter1", in_channels, out_channels, 1, 1, shape),
      spatial_(name + ".filter2", out_channels, out_channels, shape.kernel_time, shape.kernel_freq, shape),
      expand_(name + ".filter3", out_channels, out_channels, 1, 1, shape),
      skip_(name + ".skip", in_channels, out_channels, 1, 1, shape) {}

void ResidualBlock::initialize(Rng& rng) {
    reduce_.initialize(rng);
    spatial_.initialize(rng);
    expand_.initialize(rng);
    skip_.initialize(rng);
}

void ResidualBlock::forward(const Tensor& x, bool training, Workspace& ws) {
    reduce_.forward(x, training, ws);
    spatial_.forward(reduce_.output(), training, ws);
    expand_.forward(spatial_.output(), training, ws);
    skip_.forward(x, training, ws);
    y_ = expand_.output();
    const auto& s = skip_.output().data;
    for (std::size_t i = 0; i < y_.data.size(); ++i) y_.data[i] += s[i];
}

void ResidualBlock::backward(const Tensor& dy, Tensor& dx, Workspace& ws) {
    expand_.backward(dy, grad_mid_, ws);
    spatial_.backward(grad_mid_, grad_filter_, ws);
    reduce_.backward(grad_filter_, grad_mid_, ws);
    skip_.backward(dy, dx, ws);
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += grad_mid_.data[i];
}

void ResidualBlock::release() {
    reduce_.release();
    spatial_.release();
    expand_.release();
    skip_.release();
    y_ = {};
    grad_filter_ = {};
    grad_mid_ = {};
}

void ResidualBlock::collect(std::vector<Param*>& params, std::vector<Buffer*>& buffers) {
    reduce_.collect(params, buffers);
    spatial_.collect(params, buffers);
    expand_.collect(params, buffers);
    skip_.collect(params, buffers);
}

// ---------------------------------------------------------------- Network

struct Network::Encoder {
    ConvBlock block;
    ResidualBlock residual;
    MaxPool2x2 pool;
    Tensor pooled;
    Tensor grad_skip;
};

struct Network::Decoder {
    TimeUpsample up;
    Conv2d skip_projection;
    ConvBlock block;
    ResidualBlock residual;
    Tensor upsampled;
    Tensor folded;
    Tensor projected;
    Tensor joined;
    Tensor grad_joined;
    Tensor grad_up;
    Tensor grad_projected;
    Tensor grad_folded;
};

Network::Network(const NetworkShape& shape) : shape_(shape) {
    int in_channels = shape.input_channels;
    int freq = shape.input_scales;
    for (int level = 0; level < shape.depth; ++level) {
        const int maps = shape.base_feature_maps << level;
        const std::string name = "encoder" + std::to_string(level);
        auto enc = std::make_unique<Encoder>();
        enc->block = ConvBlock(name + ".block", in_channels, maps, shape.kernel_time, shape.kernel_freq, shape);
        enc->residual = ResidualBlock(name + ".residual", maps, maps, shape);
        encoders_.push_back(std::move(enc));
        in_channels = maps;
        freq /= 2;
    }
    const int bottom_maps = shape.base_feature_maps << shape.depth;
    bottleneck_block_ = std::make_unique<ConvBlock>("bottleneck.block", in_channels, bottom_maps, shape.kernel_time,
                                                    shape.kernel_freq, shape);
    bottleneck_residual_ = std::make_unique<ResidualBlock>("bottleneck.residual", bottom_maps, bottom_maps, shape);

    in_channels = bottom_maps;
    for (int level = shape.depth - 1; level >= 0; --level) {
        const int maps = shape.base_feature_maps << level;
        const int skip_freq = shape.input_scales >> level;
        const std::string name = "decoder" + std::to_string(level);
        auto dec = std::make_unique<Decoder>();
        dec->up = TimeUpsample(name + ".up", in_channels, maps);
        dec->skip_projection = Conv2d(name + ".skip_projection", maps * skip_freq, maps, 1, 1);
        dec->block = ConvBlock(name + ".block", 2 * maps, maps, shape.kernel_time, shape.kernel_freq, shape);
        dec->residual = ResidualBlock(name + ".residual", maps, maps, shape);
        decoders_.push_back(std::move(dec));
        in_channels = maps;
    }
    head_ = Conv2d("head", in_channels, 1, shape.kernel_time, shape.kernel_freq);

    for (auto& enc : encoders_) {
        enc->block.collect(params_, buffers_);
        enc->residual.collect(params_, buffers_);
    }
    bottleneck_block_->collect(params_, buffers_);
    bottleneck_residual_->collect(params_, buffers_);
    for (auto& dec : decoders_) {
        dec->up.collect(params_);
        dec->skip_projection.collect(params_);
        dec->block.collect(params_, buffers_);
        dec->residual.collect(params_, buffers_);
    }
    head_.collect(params_);
}

Network::~Network() = default;

void Network::initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& enc : encoders_) {
        enc->block.initialize(rng);
        enc->residual.initialize(rng);
    }
    bottleneck_block_->initialize(rng);
    bottleneck_residual_->initialize(rng);
    for (auto& dec : decoders_) {
        dec->up.initialize(rng);
        dec->skip_projection.initialize(rng);
        dec->block.initialize(rng);
        dec->residual.initialize(rng);
    }
    head_.initialize(rng);
}

const Tensor& Network::forward(const Tensor& input, bool training) {
    trace_ = {};
    trace_.input_time = input.time;
    const Tensor* x = &input;
    for (auto& enc : encoders_) {
        enc->block.forward(*x, training, ws_);
        enc->residual.forward(enc->block.output(), training, ws_);
        enc->pool.forward(enc->residual.output(), enc->pooled);
        x = &enc->pooled;
    }
    bottleneck_block_->forward(*x, training, ws_);
    bottleneck_residual_->forward(bottleneck_block_->output(), training, ws_);
    x = &bottleneck_residual_->output();
    trace_.bottleneck_time = x->time;
    trace_.bottleneck_freq = x->freq;
    trace_.bottleneck_channels = x->channels;

    for (std::size_t i = 0; i < decoders_.size(); ++i) {
        auto& dec = *decoders_[i];
        const auto& skip = encoders_[encoders_.size() - 1 - i]->residual.output();
        dec.up.forward(*x, dec.upsampled);
        dec.upsampled.lengths = skip.lengths;
        fold_frequency(skip, dec.folded);
        dec.skip_projection.forward(dec.folded, dec.projected);
        concat_channels(dec.upsampled, dec.projected, dec.joined);
        dec.block.forward(dec.joined, training, ws_);
        dec.residual.forward(dec.block.output(), training, ws_);
        x = &dec.residual.output();
    }
    head_.forward(*x, logits_);
    return logits_;
}

void Network::backward(const Tensor& grad_logits) {
    for (Param* p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0F);

    const Tensor& head_input = decoders_.back()->residual.output();
    head_.backward(head_input, grad_logits, &head_input_grad_);

    Tensor grad = std::move(head_input_grad_);
    Tensor grad_below;
    for (std::size_t r = decoders_.size(); r-- > 0;) {
        auto& dec = *decoders_[r];
        auto& enc = *encoders_[encoders_.size() - 1 - r];
        dec.residual.backward(grad, ws_.grad_b, ws_);
        dec.block.backward(ws_.grad_b, dec.grad_joined, ws_);
        split_channels_grad(dec.grad_joined, dec.upsampled.channels, dec.grad_up, dec.grad_projected);
        dec.skip_projection.backward(dec.folded, dec.grad_projected, &dec.grad_folded);
        const auto& skip = enc.residual.output();
        unfold_frequency_grad(dec.grad_folded, skip.channels, skip.freq, enc.grad_skip);
        const Tensor& below = r == 0 ? bottleneck_residual_->output() : decoders_[r - 1]->residual.output();
        dec.up.backward(below, dec.grad_up, grad_below);
        std::swap(grad, grad_below);
    }

    bottleneck_residual_->backward(grad, ws_.grad_b, ws_);
    bottleneck_block_->backward(ws_.grad_b, grad_below, ws_);
    std::swap(grad, grad_below);

    for (std::size_t l = encoders_.size(); l-- > 0;) {
        auto& enc = *encoders_[l];
        enc.pool.backward(grad, ws_.grad_a);
        for (std::size_t i = 0; i < ws_.grad_a.data.size(); ++i) ws_.grad_a.data[i] += enc.grad_skip.data[i];
        enc.residual.backward(ws_.grad_a, ws_.grad_b, ws_);
        enc.block.backward(ws_.grad_b, grad_below, ws_);
        std::swap(grad, grad_below);
    }
    head_input_grad_ = std::move(grad);
}

void Network::release() {
    for (auto& enc : encoders_) {
        enc->block.release();
        enc->residual.release();
        enc->pooled = {};
        enc->grad_skip = {};
    }
    bottleneck_block_->release();
    bottleneck_residual_->release();
    for (auto& dec : decoders_) {
        dec->block.release();
        dec->residual.release();
        dec->upsampled = {};
        dec->folded = {};
        dec->projected = {};
        dec->joined = {};
        dec->grad_joined = {};
        dec->grad_up = {};
        dec->grad_projected = {};
        dec->grad_folded = {};
    }
    ws_ = {};
    logits_ = {};
    head_input_grad_ = {};
}

}  // namespace axle::nn
