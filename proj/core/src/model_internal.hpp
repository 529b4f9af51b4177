#pragma once

// Shared internals of Model, split between model.cpp (encoder/decoder) and
// detection.cpp (FPN/RPN/ROI pathway).

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "adc/detgeom.hpp"
#include "adc/model.hpp"
#include "adc/nn.hpp"

namespace adc {

struct Model::ResidualBlock {
    nn::Conv2d conv1, conv2;
    nn::GroupNorm gn1, gn2;
    nn::ReLU relu1, relu2;
    bool has_proj = false;
    nn::Conv2d proj;
    nn::GroupNorm proj_gn;

    ResidualBlock(int in_ch, int out_ch, int stride, int gn_groups)
        : conv1(in_ch, out_ch, 3, stride, 1, false),
          conv2(out_ch, out_ch, 3, 1, 1, false),
          gn1(out_ch, gn_groups),
          gn2(out_ch, gn_groups),
          has_proj(stride != 1 || in_ch != out_ch) {
        if (has_proj) {
            proj = nn::Conv2d(in_ch, out_ch, 1, stride, 0, false);
            proj_gn = nn::GroupNorm(out_ch, gn_groups);
        }
    }

    Tensor forward(const Tensor& x, const nn::FwdCtx& ctx) {
        Tensor y = relu1.forward(gn1.forward(conv1.forward(x, ctx), ctx), ctx);
        y = gn2.forward(conv2.forward(y, ctx), ctx);
        Tensor s = has_proj ? proj_gn.forward(proj.forward(x, ctx), ctx) : x;
        for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += s.data[i];
        return relu2.forward(y, ctx);
    }

    Tensor backward(const Tensor& dy) {
        Tensor d = relu2.backward(dy);
        Tensor dmain = conv1.backward(gn1.backward(relu1.backward(conv2.backward(gn2.backward(d)))));
        if (has_proj) {
            Tensor ds = proj.backward(proj_gn.backward(d));
            for (std::size_t i = 0; i < dmain.data.size(); ++i) dmain.data[i] += ds.data[i];
        } else {
            for (std::size_t i = 0; i < dmain.data.size(); ++i) dmain.data[i] += d.data[i];
        }
        return dmain;
    }

    void init(Pcg32& rng) {
        conv1.init(rng);
        conv2.init(rng);
        if (has_proj) proj.init(rng);
    }

    void reg(const std::string& prefix, nn::ParamRegistry& r) {
        conv1.reg(prefix + ".conv1", r);
        gn1.reg(prefix + ".gn1", r);
        conv2.reg(prefix + ".conv2", r);
        gn2.reg(prefix + ".gn2", r);
        if (has_proj) {
            proj.reg(prefix + ".proj", r);
            proj_gn.reg(prefix + ".proj_gn", r);
        }
    }
};

struct Model::DecoderStage {
    nn::ConvTranspose2d up;
    nn::GroupNorm gn;
    nn::ReLU relu;
    nn::Dropout drop;

    DecoderStage(int in_ch, int out_ch, int k, int gn_groups, double dropout_p)
        : up(in_ch, out_ch, k, 2, k == 4 ? 1 : 0, true),
          gn(out_ch, gn_groups),
          drop(dropout_p) {}

    Tensor forward(const Tensor& x, const nn::FwdCtx& ctx) {
        return drop.forward(relu.forward(gn.forward(up.forward(x, ctx), ctx), ctx), ctx);
    }

    Tensor backward(const Tensor& dy) {
        return up.backward(gn.backward(relu.backward(drop.backward(dy))));
    }

    void init(Pcg32& rng) { up.init(rng); }

    void reg(const std::string& prefix, nn::ParamRegistry& r) {
        up.reg(prefix + ".up", r);
        gn.reg(prefix + ".gn", r);
    }
};

/// Records one sampled ROI for the align backward scatter.
struct RoiRec {
    int level = 0;  // FPN level index 0..3 (P2..P5)
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // padded-image coords
};

struct Model::DetectionModule {
    explicit DetectionModule(const ModelConfig& cfg);

    void init(Pcg32& rng);
    void reg(nn::ParamRegistry& r);

    Model::DetectionOutput forward(Model& model, const Model::EncoderFeatures& f, bool train,
                                   const BoxList* gt_boxes, const nn::FwdCtx& ctx);
    /// Scatters the cached loss grads back to the encoder accumulators.
    void backward(Model::StepTrace& trace, double proposal_scale, double final_scale);

    // FPN
    std::array<nn::Conv2d, 4> lateral;   // encoder stages 2..5 -> fpn channels
    std::array<nn::Conv2d, 4> out_conv;  // P2..P5
    // RPN head, shared across levels
    nn::Conv2d rpn_conv, rpn_cls, rpn_reg;
    nn::ReLU rpn_relu;
    // ROI head
    nn::Linear fc1, fc2, cls_head, reg_head;
    nn::ReLU fc_relu1, fc_relu2;

    int fpn_ch = 0;
    int num_anchors = 0;  // per location
    ModelConfig cfg;
};

struct Model::StepTrace {
    int orig_w = 0, orig_h = 0, pad_w = 0, pad_h = 0;
    bool encoder_ran = false, depth_ran = false, det_ran = false;

    // Gradient accumulators for the shared features (filled by the head
    // backwards, consumed by the encoder backward).
    Tensor denc_f0;
    std::array<Tensor, 5> denc_stage;

    // Detection-side caches (written by DetectionModule::forward in train
    // mode, consumed by its backward).
    struct Det {
        std::array<std::pair<int, int>, 5> level_dims;  // (h, w) of P2..P6
        std::array<Tensor, 5> drpn_cls, drpn_reg;       // per-level RPN output grads
        Mat droi_cls, droi_reg;                         // ROI head output grads
        std::vector<RoiRec> rois;
    } det;
};

// ROI align over one feature level (values sampled at integer lattice
// points, `sampling`^2 bilinear taps per bin, average-pooled).
void roi_align_forward(const Tensor& feat, const RoiRec& roi, double spatial_scale, int pool,
                       int sampling, float* out);
void roi_align_backward(const float* dout, const RoiRec& roi, double spatial_scale, int pool,
                        int sampling, Tensor& dfeat);

}  // namespace adc
