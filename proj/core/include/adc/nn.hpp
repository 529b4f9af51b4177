#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adc/rng.hpp"
#include "adc/tensor.hpp"

namespace adc::nn {

/// One learnable tensor plus its gradient and Adam moments.
struct Param {
    std::vector<int> shape;
    std::vector<float> value, grad, m, v;

    void resize(std::vector<int> s) {
        shape = std::move(s);
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        value.assign(n, 0.0f);
        grad.assign(n, 0.0f);
        m.assign(n, 0.0f);
        v.assign(n, 0.0f);
    }
    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

struct NamedParam {
    std::string name;
    Param* param = nullptr;
};

using ParamRegistry = std::vector<NamedParam>;

/// Forward-pass context. `grad` caches activations for a later backward()
/// (caches form a LIFO stack, so weight-shared layers replay correctly as
/// long as backward calls mirror forward calls in reverse). `dropout`
/// activates dropout layers using `rng` (MC-dropout inference sets dropout
/// without grad).
struct FwdCtx {
    bool grad = false;
    bool dropout = false;
    Pcg32* rng = nullptr;
};

/// 2-D convolution, zero padding, square kernel. Weight layout
/// [out, in, k, k]; forward is im2col + GEMM.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int k, int stride, int pad, bool bias = true);

    Tensor forward(const Tensor& x, const FwdCtx& ctx);
    Tensor backward(const Tensor& dy);

    void init(Pcg32& rng, double weight_std = -1.0);  // <0: Kaiming fan-in
    void reg(const std::string& prefix, ParamRegistry& r);

    int out_ch() const { return out_ch_; }
    bool caches_empty() const { return cache_.empty(); }

private:
    int in_ch_ = 0, out_ch_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
    bool bias_ = true;
    Param w_, b_;
    std::vector<Tensor> cache_;
};

/// Transposed 2-D convolution (stride-2 upsampling). Weight layout
/// [in, out, k, k]; forward is GEMM + col2im-add.
class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(int in_ch, int out_ch, int k, int stride, int pad, bool bias = true);

    Tensor forward(const Tensor& x, const FwdCtx& ctx);
    Tensor backward(const Tensor& dy);

    void init(Pcg32& rng);
    void reg(const std::string& prefix, ParamRegistry& r);

    int out_ch() const { return out_ch_; }

private:
    int in_ch_ = 0, out_ch_ = 0, k_ = 2, stride_ = 2, pad_ = 0;
    bool bias_ = true;
    Param w_, b_;
    std::vector<Tensor> cache_;
};

/// Group normalization with per-channel affine. Statistics are computed
/// over (channels-in-group x H x W); group count adapts downward until it
/// divides the channel count.
class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(int channels, int groups);

    Tensor forward(const Tensor& x, const FwdCtx& ctx);
    Tensor backward(const Tensor& dy);

    void init();
    void reg(const std::string& prefix, ParamRegistry& r);

private:
    struct Cache {
        Tensor xhat;
        std::vector<float> invstd;  // per group
    };
    int channels_ = 0, groups_ = 1;
    Param gamma_, beta_;
    std::vector<Cache> cache_;
};

/// Fully connected layer on row-major matrices. Weight layout [out, in].
class Linear {
public:
    Linear() = default;
    Linear(int in_dim, int out_dim);

    Mat forward(const Mat& x, const FwdCtx& ctx);
    Mat backward(const Mat& dy);

    void init(Pcg32& rng, double weight_std = -1.0);
    void reg(const std::string& prefix, ParamRegistry& r);

private:
    int in_dim_ = 0, out_dim_ = 0;
    Param w_, b_;
    std::vector<Mat> cache_;
};

class ReLU {
public:
    Tensor forward(const Tensor& x, const FwdCtx& ctx);
    Tensor backward(const Tensor& dy);
    Mat forward(const Mat& x, const FwdCtx& ctx);
    Mat backward(const Mat& dy);

private:
    std::vector<std::vector<std::uint8_t>> mask_;
};

/// Inverted dropout: active only when ctx.dropout is set; kept activations
/// are scaled by 1/(1-p) so expectations match the deterministic pass.
class Dropout {
public:
    Dropout() = default;
    explicit Dropout(double p) : p_(p) {}

    Tensor forward(const Tensor& x, const FwdCtx& ctx);
    Tensor backward(const Tensor& dy);

private:
    double p_ = 0.0;
    std::vector<std::vector<std::uint8_t>> mask_;  // empty entry = pass-through
};

/// y = scale * softplus(x), elementwise, numerically stable.
class ScaledSoftplus {
public:
    ScaledSoftplus() = default;
    explicit ScaledSoftplus(double scale) : scale_(static_cast<float>(scale)) {}

    Tensor forward(const Tensor& x, const FwdCtx& ctx);
    Tensor backward(const Tensor& dy);

private:
    float scale_ = 1.0f;
    std::vector<Tensor> x_cache_;
};

// ---- stateless helpers -------------------------------------------------

/// Picks every second pixel (max-pool with kernel 1, stride 2); output dims
/// are ceil(h/2) x ceil(w/2).
Tensor subsample2x(const Tensor& x);
Tensor subsample2x_backward(const Tensor& dy, int in_h, int in_w);

/// Nearest-neighbour 2x upsampling; requires the target to be exactly 2x.
Tensor upsample2x_nearest(const Tensor& x);
Tensor upsample2x_nearest_backward(const Tensor& dy);

/// Pads on the right/bottom with edge-inclusive mirror reflection.
Tensor reflect_pad_br(const Tensor& x, int out_h, int out_w);

/// Crop to the top-left h x w window, and its adjoint (zero-pad).
Tensor crop_tl(const Tensor& x, int out_h, int out_w);
Tensor crop_tl_backward(const Tensor& dy, int in_h, int in_w);

/// Global 2-norm of all registered gradients; scales them in place if the
/// norm exceeds max_norm. Returns the pre-clip norm.
double clip_grad_norm(const ParamRegistry& params, double max_norm);

}  // namespace adc::nn
