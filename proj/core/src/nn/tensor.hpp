#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace axle::nn {

// Buffers seen through Eigen maps. A fixed alignment keeps vectorised
// reductions in the same order from run to run, whatever the heap state.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

/// Activations laid out [batch][channel][time][freq]. `lengths` holds the
/// number of valid time steps of each batch item at this resolution; the
/// rest is padding and is excluded from normalisation statistics.
struct Tensor {
    int batch = 0;
    int channels = 0;
    std::int64_t time = 0;
    int freq = 0;
    FloatBuffer data;
    std::vector<std::int64_t> lengths;

    void resize(int b, int c, std::int64_t t, int f) {
        batch = b;
        channels = c;
        time = t;
        freq = f;
        data.assign(static_cast<std::size_t>(b) * static_cast<std::size_t>(c) * static_cast<std::size_t>(t) *
                        static_cast<std::size_t>(f),
                    0.0F);
    }

    /// Like resize() but leaves existing contents in place; for outputs that
    /// are overwritten completely.
    void reshape(int b, int c, std::int64_t t, int f) {
        batch = b;
        channels = c;
        time = t;
        freq = f;
        data.resize(static_cast<std::size_t>(b) * static_cast<std::size_t>(c) * static_cast<std::size_t>(t) *
                    static_cast<std::size_t>(f));
    }

    void resize_like(const Tensor& other, int c) {
        resize(other.batch, c, other.time, other.freq);
        lengths = other.lengths;
    }

    [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(time) * static_cast<std::size_t>(freq); }
    [[nodiscard]] std::size_t item_size() const { return plane() * static_cast<std::size_t>(channels); }

    float* item(int b) { return data.data() + static_cast<std::size_t>(b) * item_size(); }
    [[nodiscard]] const float* item(int b) const { return data.data() + static_cast<std::size_t>(b) * item_size(); }

    float* channel(int b, int c) { return item(b) + static_cast<std::size_t>(c) * plane(); }
    [[nodiscard]] const float* channel(int b, int c) const {
        return item(b) + static_cast<std::size_t>(c) * plane();
    }
};

/// Trainable parameter with its gradient and Adam moments.
struct Param {
    std::string name;
    FloatBuffer value;
    FloatBuffer grad;
    FloatBuffer m;
    FloatBuffer v;

    void init(std::string param_name, std::size_t n) {
        name = std::move(param_name);
        value.assign(n, 0.0F);
        grad.assign(n, 0.0F);
        m.assign(n, 0.0F);
        v.assign(n, 0.0F);
    }
};

/// Non-trainable state that is still part of a checkpoint.
struct Buffer {
    std::string name;
    FloatBuffer value;
};

}  // namespace axle::nn
