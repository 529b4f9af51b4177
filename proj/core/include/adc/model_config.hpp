#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adc {

/// Detection-pathway hyperparameters. The paper never reports its proposal
/// counts or thresholds; these defaults follow the cited detector lineage,
/// scaled down for 320x240 scenes.
struct DetectionConfig {
    double rpn_pos_iou = 0.7;
    double rpn_neg_iou = 0.3;
    int rpn_batch = 64;            // anchors sampled per image for the RPN loss
    double rpn_pos_fraction = 0.5;
    int rpn_pre_nms_topk = 512;    // per level
    int rpn_post_nms_train = 128;
    int rpn_post_nms_infer = 64;
    double rpn_nms_iou = 0.7;
    int roi_batch = 64;            // proposals sampled per image for the ROI loss
    double roi_pos_fraction = 0.25;
    double roi_pos_iou = 0.5;
    int roi_pool_size = 7;
    int roi_sampling = 2;          // bilinear samples per pooled bin side
    int roi_head_dim = 256;
    double score_thresh = 0.05;
    double nms_iou = 0.5;
    int max_detections = 50;
};

/// Architecture hyperparameters of the shared encoder and the two heads.
struct ModelConfig {
    int input_width = 320;
    int input_height = 240;
    int depth_stem_channels = 16;
    int rgb_stem_channels = 48;
    std::vector<int> encoder_channels{64, 64, 128, 256, 512};
    /// Residual (basic) blocks per stage. Stage 1 is a single stride-2 block
    /// standing in for the classic 7x7 stem; stages 2-5 mirror ResNet-34's
    /// layer1-4 block counts.
    std::vector<int> encoder_blocks{1, 3, 4, 6, 3};
    int bottleneck_channels = 512;
    std::vector<int> decoder_channels{256, 128, 64, 64, 64};
    int fpn_channels = 64;
    std::vector<double> anchor_sizes{16, 32, 64, 128, 256};  // one per FPN level P2..P6
    std::vector<double> anchor_ratios{0.5, 1.0, 2.0};
    int num_classes = 2;  // foreground classes; background is implicit
    double dropout_rate = 0.2;
    bool multitask = true;
    /// Output depth in meters = depth_scale * softplus(head logit). Keeps the
    /// head operating near unit scale for metric scenes.
    double depth_scale = 50.0;
    int groupnorm_groups = 8;
    int tconv_kernel = 2;  // 2 (stride 2, no overlap) or 4 (stride 2, pad 1)
    DetectionConfig det;

    /// Throws ValidationError if the 5-stage structure or ranges are violated.
    void validate() const;

    std::string to_json_string() const;            // canonical: compact, sorted keys
    static ModelConfig from_json_string(const std::string& text);

    /// FNV-1a over the canonical JSON text, as stored in checkpoint manifests.
    std::string config_hash() const;
};

bool operator==(const ModelConfig& a, const ModelConfig& b);

}  // namespace adc
