#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "adc/box.hpp"
#include "adc/image.hpp"
#include "adc/losses.hpp"
#include "adc/model_config.hpp"
#include "adc/nn.hpp"
#include "adc/state.hpp"
#include "adc/tensor.hpp"

namespace adc {

/// The multi-task network: fused depth+RGB stems, a 5-stage residual
/// encoder shared by both heads, a transpose-conv depth decoder with skip
/// connections, and an FPN + RPN + ROI detection pathway.
///
/// A Model instance is not thread-safe (forward passes cache activations
/// for backward); for concurrent inference create one Model per thread and
/// import the same NetworkState.
class Model {
public:
    explicit Model(const ModelConfig& cfg);
    ~Model();
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelConfig& config() const { return cfg_; }

    void init_params(std::uint64_t seed);
    NetworkState export_state() const;
    /// Shape- and name-checked; throws ValidationError on mismatch.
    void import_state(const NetworkState& state);
    nn::ParamRegistry& params() { return registry_; }

    struct EncoderFeatures {
        Tensor f0;                    // fused stems at full (padded) resolution
        std::array<Tensor, 5> stage;  // strides 2,4,8,16,32 of the padded input
        int orig_w = 0, orig_h = 0;
        int pad_w = 0, pad_h = 0;
    };

    /// Stems + 5 residual stages over the reflect-padded inputs
    /// (next multiple of 32). Requires H, W >= 32.
    EncoderFeatures forward_encoder(const ImageRgb8& rgb, const SparseDepthMap& sparse,
                                    const nn::FwdCtx& ctx = {});

    /// Bottleneck + 5 transpose-conv stages with encoder skips, 1-channel
    /// projection, scaled softplus, crop to the original H x W. All output
    /// values are strictly positive.
    DepthMap forward_depth(const EncoderFeatures& f, const nn::FwdCtx& ctx = {});

    struct DetectionOutput {
        BoxList detections;                // infer mode (post-NMS, clipped)
        losses::DetectionLossTerms terms;  // train mode
        int fpn_levels = 0;
    };

    /// FPN over encoder stages 2-5 plus a pooled P6 (5 scales), RPN, and the
    /// ROI refinement head. In train mode gt_boxes must be supplied and
    /// ctx.rng drives anchor/ROI sampling; loss gradients are cached for
    /// backward(). Requires config().multitask.
    DetectionOutput forward_detection(const EncoderFeatures& f, bool train,
                                      const BoxList* gt_boxes, const nn::FwdCtx& ctx = {});

    struct Prediction {
        DepthMap depth;
        BoxList detections;
    };

    /// Deterministic inference composition: encoder, depth head, and (when
    /// the config is multitask) the detection head.
    Prediction predict(const ImageRgb8& rgb, const SparseDepthMap& sparse);

    void zero_grads();

    /// Backpropagates the step recorded by the last grad-enabled forwards.
    /// d_depth is dLoss/d(depth) over the original H x W (row-major; pass
    /// empty to skip the depth head). det_proposal_scale / det_final_scale
    /// multiply the cached detection-loss gradients (0 to skip).
    void backward(const std::vector<double>& d_depth, double det_proposal_scale = 0.0,
                  double det_final_scale = 0.0);

private:
    struct ResidualBlock;
    struct DecoderStage;
    struct DetectionModule;
    struct StepTrace;

    Tensor run_encoder_stages(const Tensor& fused, const nn::FwdCtx& ctx,
                              EncoderFeatures& feats);
    int f0_channels() const;

    ModelConfig cfg_;

    nn::Conv2d stem_depth_, stem_rgb_;
    nn::ReLU stem_depth_relu_, stem_rgb_relu_;
    std::vector<std::vector<ResidualBlock>> stages_;
    nn::Conv2d bottleneck_;
    nn::GroupNorm bottleneck_gn_;
    nn::ReLU bottleneck_relu_;
    std::vector<DecoderStage> decoder_;
    nn::Conv2d depth_head_;
    nn::ScaledSoftplus depth_act_;
    std::unique_ptr<DetectionModule> det_;

    nn::ParamRegistry registry_;
    std::unique_ptr<StepTrace> trace_;
};

}  // namespace adc
