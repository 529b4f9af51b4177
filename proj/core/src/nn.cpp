#include "adc/nn.hpp"

#include <cassert>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <Eigen/Core>

namespace adc::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

/// x: [C,H,W] -> col: [C*k*k, out_h*out_w] for a (k, stride, pad) conv.
void im2col(const Tensor& x, int k, int stride, int pad, int out_h, int out_w, float* col) {
    const int C = x.c, H = x.h, W = x.w;
    const std::size_t out_px = static_cast<std::size_t>(out_h) * out_w;
    for (int ci = 0; ci < C; ++ci) {
        const float* plane = x.chan(ci);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* dst = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * out_px;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= H) {
                        std::memset(dst + static_cast<std::size_t>(oy) * out_w, 0,
                                    sizeof(float) * static_cast<std::size_t>(out_w));
                        continue;
                    }
                    const float* src_row = plane + static_cast<std::size_t>(iy) * W;
                    float* dst_row = dst + static_cast<std::size_t>(oy) * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        dst_row[ox] = (ix >= 0 && ix < W) ? src_row[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatter-add col back into an image.
void col2im_add(const float* col, int C, int H, int W, int k, int stride, int pad, int out_h,
                int out_w, Tensor& x) {
    const std::size_t out_px = static_cast<std::size_t>(out_h) * out_w;
    for (int ci = 0; ci < C; ++ci) {
        float* plane = x.chan(ci);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* src = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * out_px;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    float* dst_row = plane + static_cast<std::size_t>(iy) * W;
                    const float* src_row = src + static_cast<std::size_t>(oy) * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < W) dst_row[ix] += src_row[ox];
                    }
                }
            }
        }
    }
}

void kaiming_init(Param& w, int fan_in, Pcg32& rng, double std_override) {
    const double std = std_override > 0.0 ? std_override : std::sqrt(2.0 / fan_in);
    for (auto& v : w.value) v = static_cast<float>(std * rng.normal());
}

thread_local std::vector<float> g_col_scratch;

float* col_scratch(std::size_t n) {
    if (g_col_scratch.size() < n) g_col_scratch.resize(n);
    return g_col_scratch.data();
}

}  // namespace

// ---- Conv2d --------------------------------------------------------------

Conv2d::Conv2d(int in_ch, int out_ch, int k, int stride, int pad, bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad), bias_(bias) {
    w_.resize({out_ch, in_ch, k, k});
    if (bias_) b_.resize({out_ch});
}

void Conv2d::init(Pcg32& rng, double weight_std) {
    kaiming_init(w_, in_ch_ * k_ * k_, rng, weight_std);
}

void Conv2d::reg(const std::string& prefix, ParamRegistry& r) {
    r.push_back({prefix + ".weight", &w_});
    if (bias_) r.push_back({prefix + ".bias", &b_});
}

Tensor Conv2d::forward(const Tensor& x, const FwdCtx& ctx) {
    assert(x.c == in_ch_);
    const int out_h = (x.h + 2 * pad_ - k_) / stride_ + 1;
    const int out_w = (x.w + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t out_px = static_cast<std::size_t>(out_h) * out_w;
    const int kdim = in_ch_ * k_ * k_;

    Tensor y(out_ch_, out_h, out_w);
    float* col = col_scratch(static_cast<std::size_t>(kdim) * out_px);
    im2col(x, k_, stride_, pad_, out_h, out_w, col);

    ConstMapMat W(w_.value.data(), out_ch_, kdim);
    ConstMapMat Xc(col, kdim, static_cast<Eigen::Index>(out_px));
    MapMat Y(y.data.data(), out_ch_, static_cast<Eigen::Index>(out_px));
    Y.noalias() = W * Xc;
    if (bias_) {
        for (int co = 0; co < out_ch_; ++co)
            Y.row(co).array() += b_.value[static_cast<std::size_t>(co)];
    }
    if (ctx.grad) cache_.push_back(x);
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    if (cache_.empty()) throw std::logic_error("Conv2d::backward without cached forward");
    Tensor x = std::move(cache_.back());
    cache_.pop_back();

    const int out_h = dy.h, out_w = dy.w;
    const std::size_t out_px = static_cast<std::size_t>(out_h) * out_w;
    const int kdim = in_ch_ * k_ * k_;

    float* col = col_scratch(static_cast<std::size_t>(kdim) * out_px);
    im2col(x, k_, stride_, pad_, out_h, out_w, col);

    ConstMapMat dY(dy.data.data(), out_ch_, static_cast<Eigen::Index>(out_px));
    ConstMapMat Xc(col, kdim, static_cast<Eigen::Index>(out_px));
    MapMat dW(w_.grad.data(), out_ch_, kdim);
    dW.noalias() += dY * Xc.transpose();
    if (bias_) {
        for (int co = 0; co < out_ch_; ++co)
            b_.grad[static_cast<std::size_t>(co)] += dY.row(co).sum();
    }

    // dX = col2im(W^T * dY)
    std::vector<float> dcol(static_cast<std::size_t>(kdim) * out_px);
    ConstMapMat W(w_.value.data(), out_ch_, kdim);
    MapMat dC(dcol.data(), kdim, static_cast<Eigen::Index>(out_px));
    dC.noalias() = W.transpose() * dY;

    Tensor dx(x.c, x.h, x.w);
    col2im_add(dcol.data(), in_ch_, x.h, x.w, k_, stride_, pad_, out_h, out_w, dx);
    return dx;
}

// ---- ConvTranspose2d -------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(int in_ch, int out_ch, int k, int stride, int pad, bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad), bias_(bias) {
    w_.resize({in_ch, out_ch, k, k});
    if (bias_) b_.resize({out_ch});
}

void ConvTranspose2d::init(Pcg32& rng) {
    kaiming_init(w_, in_ch_ * k_ * k_, rng, -1.0);
}

void ConvTranspose2d::reg(const std::string& prefix, ParamRegistry& r) {
    r.push_back({prefix + ".weight", &w_});
    if (bias_) r.push_back({prefix + ".bias", &b_});
}

Tensor ConvTranspose2d::forward(const Tensor& x, const FwdCtx& ctx) {
    assert(x.c == in_ch_);
    const int out_h = (x.h - 1) * stride_ - 2 * pad_ + k_;
    const int out_w = (x.w - 1) * stride_ - 2 * pad_ + k_;
    const std::size_t in_px = x.plane();
    const int kdim = out_ch_ * k_ * k_;

    // cols[kdim, in_px] = W^T[kdim, in] * X[in, in_px], then scatter.
    std::vector<float> cols(static_cast<std::size_t>(kdim) * in_px);
    ConstMapMat W(w_.value.data(), in_ch_, kdim);
    ConstMapMat X(x.data.data(), in_ch_, static_cast<Eigen::Index>(in_px));
    MapMat C(cols.data(), kdim, static_cast<Eigen::Index>(in_px));
    C.noalias() = W.transpose() * X;

    Tensor y(out_ch_, out_h, out_w);
    col2im_add(cols.data(), out_ch_, out_h, out_w, k_, stride_, pad_, x.h, x.w, y);
    if (bias_) {
        for (int co = 0; co < out_ch_; ++co) {
            float* plane = y.chan(co);
            const float bv = b_.value[static_cast<std::size_t>(co)];
            for (std::size_t i = 0; i < y.plane(); ++i) plane[i] += bv;
        }
    }
    if (ctx.grad) cache_.push_back(x);
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
    if (cache_.empty()) throw std::logic_error("ConvTranspose2d::backward without cached forward");
    Tensor x = std::move(cache_.back());
    cache_.pop_back();

    const std::size_t in_px = x.plane();
    const int kdim = out_ch_ * k_ * k_;

    // Gather dy patches: dcols[kdim, in_px] = im2col(dy), then
    // dX = W * dcols and dW = X * dcols^T.
    float* dcols = col_scratch(static_cast<std::size_t>(kdim) * in_px);
    im2col(dy, k_, stride_, pad_, x.h, x.w, dcols);

    ConstMapMat dC(dcols, kdim, static_cast<Eigen::Index>(in_px));
    ConstMapMat W(w_.value.data(), in_ch_, kdim);
    ConstMapMat X(x.data.data(), in_ch_, static_cast<Eigen::Index>(in_px));

    Tensor dx(x.c, x.h, x.w);
    MapMat dX(dx.data.data(), in_ch_, static_cast<Eigen::Index>(in_px));
    dX.noalias() = W * dC;

    MapMat dW(w_.grad.data(), in_ch_, kdim);
    dW.noalias() += X * dC.transpose();

    if (bias_) {
        for (int co = 0; co < out_ch_; ++co) {
            const float* plane = dy.chan(co);
            double acc = 0.0;
            for (std::size_t i = 0; i < dy.plane(); ++i) acc += plane[i];
            b_.grad[static_cast<std::size_t>(co)] += static_cast<float>(acc);
        }
    }
    return dx;
}

// ---- GroupNorm -------------------------------------------------------------

GroupNorm::GroupNorm(int channels, int groups) : channels_(channels), groups_(groups) {
    while (channels_ % groups_ != 0) --groups_;
    gamma_.resize({channels});
    beta_.resize({channels});
    init();
}

void GroupNorm::init() {
    std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0f);
    std::fill(beta_.value.begin(), beta_.value.end(), 0.0f);
}

void GroupNorm::reg(const std::string& prefix, ParamRegistry& r) {
    r.push_back({prefix + ".gamma", &gamma_});
    r.push_back({prefix + ".beta", &beta_});
}

Tensor GroupNorm::forward(const Tensor& x, const FwdCtx& ctx) {
    assert(x.c == channels_);
    constexpr double kEps = 1e-5;
    const int per_group = channels_ / groups_;
    const std::size_t plane = x.plane();
    const std::size_t gsize = static_cast<std::size_t>(per_group) * plane;

    Tensor y(x.c, x.h, x.w);
    Cache cache;
    cache.xhat = Tensor(x.c, x.h, x.w);
    cache.invstd.resize(static_cast<std::size_t>(groups_));

    for (int g = 0; g < groups_; ++g) {
        const float* xs = x.chan(g * per_group);
        double mean = 0.0;
        for (std::size_t i = 0; i < gsize; ++i) mean += xs[i];
        mean /= static_cast<double>(gsize);
        double var = 0.0;
        for (std::size_t i = 0; i < gsize; ++i) {
            const double d = xs[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(gsize);
        const float invstd = static_cast<float>(1.0 / std::sqrt(var + kEps));
        cache.invstd[static_cast<std::size_t>(g)] = invstd;

        float* xh = cache.xhat.chan(g * per_group);
        const float fmean = static_cast<float>(mean);
        for (std::size_t i = 0; i < gsize; ++i) xh[i] = (xs[i] - fmean) * invstd;

        for (int cc = 0; cc < per_group; ++cc) {
            const int ci = g * per_group + cc;
            const float ga = gamma_.value[static_cast<std::size_t>(ci)];
            const float be = beta_.value[static_cast<std::size_t>(ci)];
            const float* xhc = cache.xhat.chan(ci);
            float* yc = y.chan(ci);
            for (std::size_t i = 0; i < plane; ++i) yc[i] = ga * xhc[i] + be;
        }
    }
    if (ctx.grad) cache_.push_back(std::move(cache));
    return y;
}

Tensor GroupNorm::backward(const Tensor& dy) {
    if (cache_.empty()) throw std::logic_error("GroupNorm::backward without cached forward");
    Cache cache = std::move(cache_.back());
    cache_.pop_back();

    const int per_group = channels_ / groups_;
    const std::size_t plane = dy.plane();
    const std::size_t gsize = static_cast<std::size_t>(per_group) * plane;

    Tensor dx(dy.c, dy.h, dy.w);
    for (int g = 0; g < groups_; ++g) {
        // Per-channel affine grads and the two group-level reductions.
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int cc = 0; cc < per_group; ++cc) {
            const int ci = g * per_group + cc;
            const float* dyc = dy.chan(ci);
            const float* xhc = cache.xhat.chan(ci);
            const float ga = gamma_.value[static_cast<std::size_t>(ci)];
            double dg = 0.0, db = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                dg += static_cast<double>(dyc[i]) * xhc[i];
                db += dyc[i];
                const double dxh = static_cast<double>(dyc[i]) * ga;
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xhc[i];
            }
            gamma_.grad[static_cast<std::size_t>(ci)] += static_cast<float>(dg);
            beta_.grad[static_cast<std::size_t>(ci)] += static_cast<float>(db);
        }
        const double n = static_cast<double>(gsize);
        const double invstd = cache.invstd[static_cast<std::size_t>(g)];
        for (int cc = 0; cc < per_group; ++cc) {
            const int ci = g * per_group + cc;
            const float* dyc = dy.chan(ci);
            const float* xhc = cache.xhat.chan(ci);
            const float ga = gamma_.value[static_cast<std::size_t>(ci)];
            float* dxc = dx.chan(ci);
            for (std::size_t i = 0; i < plane; ++i) {
                const double dxh = static_cast<double>(dyc[i]) * ga;
                dxc[i] = static_cast<float>(
                    invstd * (dxh - sum_dxhat / n - static_cast<double>(xhc[i]) * sum_dxhat_xhat / n));
            }
        }
    }
    return dx;
}

// ---- Linear ----------------------------------------------------------------

Linear::Linear(int in_dim, int out_dim) : in_dim_(in_dim), out_dim_(out_dim) {
    w_.resize({out_dim, in_dim});
    b_.resize({out_dim});
}

void Linear::init(Pcg32& rng, double weight_std) {
    kaiming_init(w_, in_dim_, rng, weight_std);
}

void Linear::reg(const std::string& prefix, ParamRegistry& r) {
    r.push_back({prefix + ".weight", &w_});
    r.push_back({prefix + ".bias", &b_});
}

Mat Linear::forward(const Mat& x, const FwdCtx& ctx) {
    assert(x.cols == in_dim_);
    Mat y(x.rows, out_dim_);
    ConstMapMat X(x.data.data(), x.rows, x.cols);
    ConstMapMat W(w_.value.data(), out_dim_, in_dim_);
    MapMat Y(y.data.data(), y.rows, y.cols);
    Y.noalias() = X * W.transpose();
    for (int r = 0; r < y.rows; ++r)
        for (int c = 0; c < out_dim_; ++c) y.at(r, c) += b_.value[static_cast<std::size_t>(c)];
    if (ctx.grad) cache_.push_back(x);
    return y;
}

Mat Linear::backward(const Mat& dy) {
    if (cache_.empty()) throw std::logic_error("Linear::backward without cached forward");
    Mat x = std::move(cache_.back());
    cache_.pop_back();

    ConstMapMat dY(dy.data.data(), dy.rows, dy.cols);
    ConstMapMat X(x.data.data(), x.rows, x.cols);
    ConstMapMat W(w_.value.data(), out_dim_, in_dim_);

    MapMat dW(w_.grad.data(), out_dim_, in_dim_);
    dW.noalias() += dY.transpose() * X;
    for (int r = 0; r < dy.rows; ++r)
        for (int c = 0; c < out_dim_; ++c) b_.grad[static_cast<std::size_t>(c)] += dy.at(r, c);

    Mat dx(x.rows, x.cols);
    MapMat dX(dx.data.data(), dx.rows, dx.cols);
    dX.noalias() = dY * W;
    return dx;
}

// ---- ReLU ------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, const FwdCtx& ctx) {
    Tensor y = x;
    std::vector<std::uint8_t> mask;
    if (ctx.grad) mask.resize(x.size());
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const bool pos = y.data[i] > 0.0f;
        if (!pos) y.data[i] = 0.0f;
        if (ctx.grad) mask[i] = pos ? 1 : 0;
    }
    if (ctx.grad) mask_.push_back(std::move(mask));
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    if (mask_.empty()) throw std::logic_error("ReLU::backward without cached forward");
    std::vector<std::uint8_t> mask = std::move(mask_.back());
    mask_.pop_back();
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        if (!mask[i]) dx.data[i] = 0.0f;
    return dx;
}

Mat ReLU::forward(const Mat& x, const FwdCtx& ctx) {
    Mat y = x;
    std::vector<std::uint8_t> mask;
    if (ctx.grad) mask.resize(y.data.size());
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const bool pos = y.data[i] > 0.0f;
        if (!pos) y.data[i] = 0.0f;
        if (ctx.grad) mask[i] = pos ? 1 : 0;
    }
    if (ctx.grad) mask_.push_back(std::move(mask));
    return y;
}

Mat ReLU::backward(const Mat& dy) {
    if (mask_.empty()) throw std::logic_error("ReLU::backward without cached forward");
    std::vector<std::uint8_t> mask = std::move(mask_.back());
    mask_.pop_back();
    Mat dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        if (!mask[i]) dx.data[i] = 0.0f;
    return dx;
}

// ---- Dropout ---------------------------------------------------------------

Tensor Dropout::forward(const Tensor& x, const FwdCtx& ctx) {
    if (!ctx.dropout || p_ <= 0.0) {
        if (ctx.grad) mask_.emplace_back();  // pass-through marker
        return x;
    }
    if (ctx.rng == nullptr) throw std::logic_error("Dropout: active but no rng supplied");
    Tensor y = x;
    std::vector<std::uint8_t> mask(x.size());
    const float scale = static_cast<float>(1.0 / (1.0 - p_));
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const bool keep = ctx.rng->next_double() >= p_;
        mask[i] = keep ? 1 : 0;
        y.data[i] = keep ? y.data[i] * scale : 0.0f;
    }
    if (ctx.grad) mask_.push_back(std::move(mask));
    return y;
}

Tensor Dropout::backward(const Tensor& dy) {
    if (mask_.empty()) throw std::logic_error("Dropout::backward without cached forward");
    std::vector<std::uint8_t> mask = std::move(mask_.back());
    mask_.pop_back();
    if (mask.empty()) return dy;
    Tensor dx = dy;
    const float scale = static_cast<float>(1.0 / (1.0 - p_));
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        dx.data[i] = mask[i] ? dx.data[i] * scale : 0.0f;
    return dx;
}

// ---- ScaledSoftplus ----------------------------------------------------------

Tensor ScaledSoftplus::forward(const Tensor& x, const FwdCtx& ctx) {
    Tensor y(x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const float v = x.data[i];
        float sp;
        if (v > 20.0f)
            sp = v;
        else if (v < -20.0f)
            sp = std::exp(v);
        else
            sp = std::log1p(std::exp(v));
        y.data[i] = scale_ * sp;
    }
    if (ctx.grad) x_cache_.push_back(x);
    return y;
}

Tensor ScaledSoftplus::backward(const Tensor& dy) {
    if (x_cache_.empty()) throw std::logic_error("ScaledSoftplus::backward without cached forward");
    Tensor x = std::move(x_cache_.back());
    x_cache_.pop_back();
    Tensor dx(dy.c, dy.h, dy.w);
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
        const float sig = 1.0f / (1.0f + std::exp(-x.data[i]));
        dx.data[i] = dy.data[i] * scale_ * sig;
    }
    return dx;
}

// ---- stateless helpers -------------------------------------------------------

Tensor subsample2x(const Tensor& x) {
    const int oh = (x.h + 1) / 2, ow = (x.w + 1) / 2;
    Tensor y(x.c, oh, ow);
    for (int ci = 0; ci < x.c; ++ci)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) y.at(ci, oy, ox) = x.at(ci, 2 * oy, 2 * ox);
    return y;
}

Tensor subsample2x_backward(const Tensor& dy, int in_h, int in_w) {
    Tensor dx(dy.c, in_h, in_w);
    for (int ci = 0; ci < dy.c; ++ci)
        for (int oy = 0; oy < dy.h; ++oy)
            for (int ox = 0; ox < dy.w; ++ox) dx.at(ci, 2 * oy, 2 * ox) = dy.at(ci, oy, ox);
    return dx;
}

Tensor upsample2x_nearest(const Tensor& x) {
    Tensor y(x.c, x.h * 2, x.w * 2);
    for (int ci = 0; ci < x.c; ++ci)
        for (int iy = 0; iy < x.h; ++iy)
            for (int ix = 0; ix < x.w; ++ix) {
                const float v = x.at(ci, iy, ix);
                y.at(ci, 2 * iy, 2 * ix) = v;
                y.at(ci, 2 * iy, 2 * ix + 1) = v;
                y.at(ci, 2 * iy + 1, 2 * ix) = v;
                y.at(ci, 2 * iy + 1, 2 * ix + 1) = v;
            }
    return y;
}

Tensor upsample2x_nearest_backward(const Tensor& dy) {
    assert(dy.h % 2 == 0 && dy.w % 2 == 0);
    Tensor dx(dy.c, dy.h / 2, dy.w / 2);
    for (int ci = 0; ci < dy.c; ++ci)
        for (int iy = 0; iy < dx.h; ++iy)
            for (int ix = 0; ix < dx.w; ++ix)
                dx.at(ci, iy, ix) = dy.at(ci, 2 * iy, 2 * ix) + dy.at(ci, 2 * iy, 2 * ix + 1) +
                                    dy.at(ci, 2 * iy + 1, 2 * ix) + dy.at(ci, 2 * iy + 1, 2 * ix + 1);
    return dx;
}

Tensor reflect_pad_br(const Tensor& x, int out_h, int out_w) {
    assert(out_h >= x.h && out_w >= x.w);
    assert(out_h - x.h < x.h && out_w - x.w < x.w);
    Tensor y(x.c, out_h, out_w);
    for (int ci = 0; ci < x.c; ++ci)
        for (int oy = 0; oy < out_h; ++oy) {
            const int sy = oy < x.h ? oy : 2 * x.h - 1 - oy;
            for (int ox = 0; ox < out_w; ++ox) {
                const int sx = ox < x.w ? ox : 2 * x.w - 1 - ox;
                y.at(ci, oy, ox) = x.at(ci, sy, sx);
            }
        }
    return y;
}

Tensor crop_tl(const Tensor& x, int out_h, int out_w) {
    assert(out_h <= x.h && out_w <= x.w);
    Tensor y(x.c, out_h, out_w);
    for (int ci = 0; ci < x.c; ++ci)
        for (int oy = 0; oy < out_h; ++oy)
            std::memcpy(y.chan(ci) + static_cast<std::size_t>(oy) * out_w,
                        x.chan(ci) + static_cast<std::size_t>(oy) * x.w,
                        sizeof(float) * static_cast<std::size_t>(out_w));
    return y;
}

Tensor crop_tl_backward(const Tensor& dy, int in_h, int in_w) {
    Tensor dx(dy.c, in_h, in_w);
    for (int ci = 0; ci < dy.c; ++ci)
        for (int oy = 0; oy < dy.h; ++oy)
            std::memcpy(dx.chan(ci) + static_cast<std::size_t>(oy) * in_w,
                        dy.chan(ci) + static_cast<std::size_t>(oy) * dy.w,
                        sizeof(float) * static_cast<std::size_t>(dy.w));
    return dx;
}

double clip_grad_norm(const ParamRegistry& params, double max_norm) {
    double sq = 0.0;
    for (const auto& np : params)
        for (float g : np.param->grad) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const float s = static_cast<float>(max_norm / norm);
        for (const auto& np : params)
            for (float& g : np.param->grad) g *= s;
    }
    return norm;
}

}  // namespace adc::nn
