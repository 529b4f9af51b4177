#pragma once

#include <cstddef>
#include <vector>

namespace adc {

/// Dense CHW float tensor (single image; the pipeline trains with batch
/// size 1 throughout, so no batch axis is carried).
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_), data(static_cast<std::size_t>(c_) * h_ * w_, 0.0f) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

    float* chan(int ci) { return data.data() + static_cast<std::size_t>(ci) * plane(); }
    const float* chan(int ci) const { return data.data() + static_cast<std::size_t>(ci) * plane(); }

    float& at(int ci, int y, int x) { return data[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
    float at(int ci, int y, int x) const {
        return data[(static_cast<std::size_t>(ci) * h + y) * w + x];
    }

    void zero() { std::fill(data.begin(), data.end(), 0.0f); }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

/// Row-major 2-D float matrix for fully-connected heads.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<float> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0f) {}

    float* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const float* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
    float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    void zero() { std::fill(data.begin(), data.end(), 0.0f); }
};

/// Channel concatenation / split.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& dy, int c_first, Tensor& da, Tensor& db);

}  // namespace adc
