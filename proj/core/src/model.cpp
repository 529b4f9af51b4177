#include "adc/model.hpp"

#include <cmath>
#include <cstring>

#include "adc/error.hpp"
#include "model_internal.hpp"

namespace adc {

namespace {

int ceil_to_32(int v) { return ((v + 31) / 32) * 32; }

Tensor rgb_to_tensor(const ImageRgb8& rgb) {
    Tensor t(3, rgb.height, rgb.width);
    const std::size_t plane = t.plane();
    for (int y = 0; y < rgb.height; ++y)
        for (int x = 0; x < rgb.width; ++x) {
            const std::uint8_t* px = rgb.px(x, y);
            const std::size_t i = static_cast<std::size_t>(y) * rgb.width + x;
            t.data[i] = px[0] / 255.0f;
            t.data[plane + i] = px[1] / 255.0f;
            t.data[2 * plane + i] = px[2] / 255.0f;
        }
    return t;
}

Tensor sparse_to_tensor(const SparseDepthMap& sparse, double depth_scale) {
    Tensor t(1, sparse.height, sparse.width);
    const float inv = static_cast<float>(1.0 / depth_scale);
    for (std::size_t i = 0; i < sparse.values.size(); ++i) t.data[i] = sparse.values[i] * inv;
    return t;
}

}  // namespace

Model::Model(const ModelConfig& cfg) : cfg_(cfg), depth_act_(cfg.depth_scale) {
    cfg_.validate();
    const int g = cfg_.groupnorm_groups;

    stem_depth_ = nn::Conv2d(1, cfg_.depth_stem_channels, 3, 1, 1, true);
    stem_rgb_ = nn::Conv2d(3, cfg_.rgb_stem_channels, 3, 1, 1, true);
    const int fused_ch = cfg_.depth_stem_channels + cfg_.rgb_stem_channels;

    int in_ch = fused_ch;
    stages_.resize(5);
    for (int s = 0; s < 5; ++s) {
        const int out_ch = cfg_.encoder_channels[static_cast<std::size_t>(s)];
        const int blocks = cfg_.encoder_blocks[static_cast<std::size_t>(s)];
        stages_[static_cast<std::size_t>(s)].reserve(static_cast<std::size_t>(blocks));
        for (int b = 0; b < blocks; ++b)
            stages_[static_cast<std::size_t>(s)].emplace_back(b == 0 ? in_ch : out_ch, out_ch,
                                                              b == 0 ? 2 : 1, g);
        in_ch = out_ch;
    }

    bottleneck_ = nn::Conv2d(cfg_.encoder_channels[4], cfg_.bottleneck_channels, 3, 1, 1, false);
    bottleneck_gn_ = nn::GroupNorm(cfg_.bottleneck_channels, g);

    int prev = cfg_.bottleneck_channels;
    decoder_.reserve(5);
    for (int d = 0; d < 5; ++d) {
        const int skip_ch = cfg_.encoder_channels[static_cast<std::size_t>(4 - d)];
        const int out_ch = cfg_.decoder_channels[static_cast<std::size_t>(d)];
        decoder_.emplace_back(prev + skip_ch, out_ch, cfg_.tconv_kernel, g, cfg_.dropout_rate);
        prev = out_ch;
    }
    depth_head_ = nn::Conv2d(prev + fused_ch, 1, 1, 1, 0, true);

    if (cfg_.multitask) det_ = std::make_unique<DetectionModule>(cfg_);

    // Registration order defines the serialized layout.
    stem_depth_.reg("stem.depth", registry_);
    stem_rgb_.reg("stem.rgb", registry_);
    for (int s = 0; s < 5; ++s)
        for (std::size_t b = 0; b < stages_[static_cast<std::size_t>(s)].size(); ++b)
            stages_[static_cast<std::size_t>(s)][b].reg(
                "encoder.stage" + std::to_string(s + 1) + ".block" + std::to_string(b), registry_);
    bottleneck_.reg("encoder.bottleneck.conv", registry_);
    bottleneck_gn_.reg("encoder.bottleneck.gn", registry_);
    for (std::size_t d = 0; d < decoder_.size(); ++d)
        decoder_[d].reg("decoder.stage" + std::to_string(d + 1), registry_);
    depth_head_.reg("decoder.head", registry_);
    if (det_) det_->reg(registry_);
}

Model::~Model() = default;

void Model::init_params(std::uint64_t seed) {
    Pcg32 rng(seed, 0x9e3779b97f4a7c15ull);
    stem_depth_.init(rng);
    stem_rgb_.init(rng);
    for (auto& stage : stages_)
        for (auto& block : stage) block.init(rng);
    bottleneck_.init(rng);
    for (auto& d : decoder_) d.init(rng);
    depth_head_.init(rng);
    if (det_) det_->init(rng);
}

NetworkState Model::export_state() const {
    NetworkState st;
    st.params.reserve(registry_.size());
    for (const auto& np : registry_) {
        ParamBlob blob;
        blob.name = np.name;
        blob.shape = np.param->shape;
        blob.values = np.param->value;
        st.params.push_back(std::move(blob));
    }
    return st;
}

void Model::import_state(const NetworkState& state) {
    for (const auto& np : registry_) {
        const ParamBlob* blob = state.find(np.name);
        if (blob == nullptr)
            throw ValidationError("import_state: missing parameter '" + np.name + "'");
        if (blob->shape != np.param->shape)
            throw ValidationError("import_state: shape mismatch for '" + np.name + "'");
        np.param->value = blob->values;
    }
    if (state.params.size() != registry_.size())
        throw ValidationError("import_state: state carries " + std::to_string(state.params.size()) +
                              " parameters, model expects " + std::to_string(registry_.size()));
}

void Model::zero_grads() {
    for (auto& np : registry_) np.param->zero_grad();
}

Tensor Model::run_encoder_stages(const Tensor& fused, const nn::FwdCtx& ctx,
                                 EncoderFeatures& feats) {
    Tensor x = fused;
    for (int s = 0; s < 5; ++s) {
        for (auto& block : stages_[static_cast<std::size_t>(s)]) x = block.forward(x, ctx);
        feats.stage[static_cast<std::size_t>(s)] = x;
    }
    return x;
}

Model::EncoderFeatures Model::forward_encoder(const ImageRgb8& rgb, const SparseDepthMap& sparse,
                                              const nn::FwdCtx& ctx) {
    if (rgb.width != sparse.width || rgb.height != sparse.height)
        throw ValidationError("forward_encoder: rgb and sparse depth sizes differ");
    if (rgb.width < 32 || rgb.height < 32)
        throw ValidationError("forward_encoder: inputs must be at least 32x32");

    EncoderFeatures feats;
    feats.orig_w = rgb.width;
    feats.orig_h = rgb.height;
    feats.pad_w = ceil_to_32(rgb.width);
    feats.pad_h = ceil_to_32(rgb.height);

    Tensor rgb_t = rgb_to_tensor(rgb);
    Tensor sparse_t = sparse_to_tensor(sparse, cfg_.depth_scale);
    if (feats.pad_w != feats.orig_w || feats.pad_h != feats.orig_h) {
        rgb_t = nn::reflect_pad_br(rgb_t, feats.pad_h, feats.pad_w);
        sparse_t = nn::reflect_pad_br(sparse_t, feats.pad_h, feats.pad_w);
    }

    // Stems stay un-normalized so absolute depth magnitude survives into the
    // fused features.
    Tensor d = stem_depth_relu_.forward(stem_depth_.forward(sparse_t, ctx), ctx);
    Tensor r = stem_rgb_relu_.forward(stem_rgb_.forward(rgb_t, ctx), ctx);
    feats.f0 = concat_channels(d, r);

    run_encoder_stages(feats.f0, ctx, feats);

    if (ctx.grad) {
        if (trace_)
            throw std::logic_error("forward_encoder: previous grad step was never backpropagated");
        trace_ = std::make_unique<StepTrace>();
        trace_->orig_w = feats.orig_w;
        trace_->orig_h = feats.orig_h;
        trace_->pad_w = feats.pad_w;
        trace_->pad_h = feats.pad_h;
        trace_->encoder_ran = true;
        trace_->denc_f0 = Tensor(feats.f0.c, feats.f0.h, feats.f0.w);
        for (int s = 0; s < 5; ++s) {
            const Tensor& st = feats.stage[static_cast<std::size_t>(s)];
            trace_->denc_stage[static_cast<std::size_t>(s)] = Tensor(st.c, st.h, st.w);
        }
    }
    return feats;
}

DepthMap Model::forward_depth(const EncoderFeatures& f, const nn::FwdCtx& ctx) {
    if (ctx.grad && (!trace_ || !trace_->encoder_ran))
        throw std::logic_error("forward_depth: grad pass requires a grad forward_encoder first");

    Tensor x = bottleneck_relu_.forward(
        bottleneck_gn_.forward(bottleneck_.forward(f.stage[4], ctx), ctx), ctx);
    for (int d = 0; d < 5; ++d) {
        Tensor in = concat_channels(x, d == 0 ? f.stage[4] : f.stage[static_cast<std::size_t>(4 - d)]);
        x = decoder_[static_cast<std::size_t>(d)].forward(in, ctx);
    }
    Tensor head_in = concat_channels(x, f.f0);
    Tensor depth_t = depth_act_.forward(depth_head_.forward(head_in, ctx), ctx);
    if (f.pad_w != f.orig_w || f.pad_h != f.orig_h)
        depth_t = nn::crop_tl(depth_t, f.orig_h, f.orig_w);

    DepthMap out(f.orig_w, f.orig_h);
    std::memcpy(out.values.data(), depth_t.data.data(), out.values.size() * sizeof(float));
    if (ctx.grad) trace_->depth_ran = true;
    return out;
}

Model::Prediction Model::predict(const ImageRgb8& rgb, const SparseDepthMap& sparse) {
    nn::FwdCtx ctx;  // no grad, no dropout: deterministic
    EncoderFeatures f = forward_encoder(rgb, sparse, ctx);
    Prediction out;
    out.depth = forward_depth(f, ctx);
    if (cfg_.multitask) out.detections = forward_detection(f, false, nullptr, ctx).detections;
    return out;
}

void Model::backward(const std::vector<double>& d_depth, double det_proposal_scale,
                     double det_final_scale) {
    if (!trace_ || !trace_->encoder_ran)
        throw std::logic_error("backward: no grad-enabled forward recorded");
    StepTrace& tr = *trace_;
    if (tr.depth_ran && d_depth.empty())
        throw std::logic_error("backward: depth head ran with grad but received no gradient");
    if (tr.det_ran && det_proposal_scale == 0.0 && det_final_scale == 0.0)
        throw std::logic_error("backward: detection ran with grad but received no scales");

    // Detection head first (order across distinct layers is free; encoder
    // runs last so its accumulators are complete).
    if (det_proposal_scale != 0.0 || det_final_scale != 0.0) {
        if (!tr.det_ran) throw std::logic_error("backward: detection did not run with grad");
        det_->backward(tr, det_proposal_scale, det_final_scale);
    }

    if (!d_depth.empty()) {
        if (!tr.depth_ran) throw std::logic_error("backward: depth head did not run with grad");
        if (d_depth.size() != static_cast<std::size_t>(tr.orig_w) * tr.orig_h)
            throw ValidationError("backward: d_depth size mismatch");
        Tensor dout(1, tr.orig_h, tr.orig_w);
        for (std::size_t i = 0; i < d_depth.size(); ++i)
            dout.data[i] = static_cast<float>(d_depth[i]);
        if (tr.pad_w != tr.orig_w || tr.pad_h != tr.orig_h)
            dout = nn::crop_tl_backward(dout, tr.pad_h, tr.pad_w);

        Tensor dhead_in = depth_head_.backward(depth_act_.backward(dout));
        Tensor dx, df0;
        split_channels(dhead_in, dhead_in.c - f0_channels(), dx, df0);
        for (std::size_t i = 0; i < df0.data.size(); ++i) tr.denc_f0.data[i] += df0.data[i];

        for (int d = 4; d >= 0; --d) {
            Tensor din = decoder_[static_cast<std::size_t>(d)].backward(dx);
            Tensor dprev, dskip;
            const int skip_ch = cfg_.encoder_channels[static_cast<std::size_t>(d == 0 ? 4 : 4 - d)];
            split_channels(din, din.c - skip_ch, dprev, dskip);
            Tensor& acc = tr.denc_stage[static_cast<std::size_t>(d == 0 ? 4 : 4 - d)];
            for (std::size_t i = 0; i < dskip.data.size(); ++i) acc.data[i] += dskip.data[i];
            dx = std::move(dprev);
        }
        Tensor db = bottleneck_.backward(bottleneck_gn_.backward(bottleneck_relu_.backward(dx)));
        for (std::size_t i = 0; i < db.data.size(); ++i) tr.denc_stage[4].data[i] += db.data[i];
    }

    // Encoder backward over the accumulated feature grads.
    Tensor d = std::move(tr.denc_stage[4]);
    for (int s = 4; s >= 0; --s) {
        if (s != 4)
            for (std::size_t i = 0; i < d.data.size(); ++i)
                d.data[i] += tr.denc_stage[static_cast<std::size_t>(s)].data[i];
        auto& blocks = stages_[static_cast<std::size_t>(s)];
        for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) d = it->backward(d);
    }
    for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += tr.denc_f0.data[i];

    Tensor dd, dr;
    split_channels(d, cfg_.depth_stem_channels, dd, dr);
    stem_depth_.backward(stem_depth_relu_.backward(dd));
    stem_rgb_.backward(stem_rgb_relu_.backward(dr));

    trace_.reset();
}

int Model::f0_channels() const { return cfg_.depth_stem_channels + cfg_.rgb_stem_channels; }

}  // namespace adc
