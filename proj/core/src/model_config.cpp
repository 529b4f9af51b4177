#include "adc/model_config.hpp"

#include <nlohmann/json.hpp>

#include "adc/error.hpp"
#include "adc/hash.hpp"

namespace adc {

using nlohmann::json;

void ModelConfig::validate() const {
    if (input_width < 32 || input_height < 32)
        throw ValidationError("ModelConfig: input size must be at least 32x32");
    if (encoder_channels.size() != 5 || encoder_blocks.size() != 5)
        throw ValidationError("ModelConfig: encoder must have exactly 5 stages");
    if (decoder_channels.size() != 5)
        throw ValidationError("ModelConfig: decoder must have exactly 5 stages");
    if (anchor_sizes.size() != 5)
        throw ValidationError("ModelConfig: one anchor size per FPN level (5) required");
    if (anchor_ratios.empty()) throw ValidationError("ModelConfig: anchor_ratios empty");
    for (int c : encoder_channels)
        if (c <= 0) throw ValidationError("ModelConfig: non-positive encoder channels");
    for (int b : encoder_blocks)
        if (b <= 0) throw ValidationError("ModelConfig: non-positive encoder block count");
    if (depth_stem_channels <= 0 || rgb_stem_channels <= 0 || bottleneck_channels <= 0 ||
        fpn_channels <= 0)
        throw ValidationError("ModelConfig: non-positive channel count");
    if (num_classes < 1) throw ValidationError("ModelConfig: num_classes must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ValidationError("ModelConfig: dropout_rate must be in [0, 1)");
    if (depth_scale <= 0.0) throw ValidationError("ModelConfig: depth_scale must be positive");
    if (groupnorm_groups < 1) throw ValidationError("ModelConfig: groupnorm_groups must be >= 1");
    if (tconv_kernel != 2 && tconv_kernel != 4)
        throw ValidationError("ModelConfig: tconv_kernel must be 2 or 4");
}

namespace {

json det_to_json(const DetectionConfig& d) {
    return json{{"rpn_pos_iou", d.rpn_pos_iou},
                {"rpn_neg_iou", d.rpn_neg_iou},
                {"rpn_batch", d.rpn_batch},
                {"rpn_pos_fraction", d.rpn_pos_fraction},
                {"rpn_pre_nms_topk", d.rpn_pre_nms_topk},
                {"rpn_post_nms_train", d.rpn_post_nms_train},
                {"rpn_post_nms_infer", d.rpn_post_nms_infer},
                {"rpn_nms_iou", d.rpn_nms_iou},
                {"roi_batch", d.roi_batch},
                {"roi_pos_fraction", d.roi_pos_fraction},
                {"roi_pos_iou", d.roi_pos_iou},
                {"roi_pool_size", d.roi_pool_size},
                {"roi_sampling", d.roi_sampling},
                {"roi_head_dim", d.roi_head_dim},
                {"score_thresh", d.score_thresh},
                {"nms_iou", d.nms_iou},
                {"max_detections", d.max_detections}};
}

DetectionConfig det_from_json(const json& j) {
    DetectionConfig d;
    j.at("rpn_pos_iou").get_to(d.rpn_pos_iou);
    j.at("rpn_neg_iou").get_to(d.rpn_neg_iou);
    j.at("rpn_batch").get_to(d.rpn_batch);
    j.at("rpn_pos_fraction").get_to(d.rpn_pos_fraction);
    j.at("rpn_pre_nms_topk").get_to(d.rpn_pre_nms_topk);
    j.at("rpn_post_nms_train").get_to(d.rpn_post_nms_train);
    j.at("rpn_post_nms_infer").get_to(d.rpn_post_nms_infer);
    j.at("rpn_nms_iou").get_to(d.rpn_nms_iou);
    j.at("roi_batch").get_to(d.roi_batch);
    j.at("roi_pos_fraction").get_to(d.roi_pos_fraction);
    j.at("roi_pos_iou").get_to(d.roi_pos_iou);
    j.at("roi_pool_size").get_to(d.roi_pool_size);
    j.at("roi_sampling").get_to(d.roi_sampling);
    j.at("roi_head_dim").get_to(d.roi_head_dim);
    j.at("score_thresh").get_to(d.score_thresh);
    j.at("nms_iou").get_to(d.nms_iou);
    j.at("max_detections").get_to(d.max_detections);
    return d;
}

}  // namespace

std::string ModelConfig::to_json_string() const {
    json j{{"input_width", input_width},
           {"input_height", input_height},
           {"depth_stem_channels", depth_stem_channels},
           {"rgb_stem_channels", rgb_stem_channels},
           {"encoder_channels", encoder_channels},
           {"encoder_blocks", encoder_blocks},
           {"bottleneck_channels", bottleneck_channels},
           {"decoder_channels", decoder_channels},
           {"fpn_channels", fpn_channels},
           {"anchor_sizes", anchor_sizes},
           {"anchor_ratios", anchor_ratios},
           {"num_classes", num_classes},
           {"dropout_rate", dropout_rate},
           {"multitask", multitask},
           {"depth_scale", depth_scale},
           {"groupnorm_groups", groupnorm_groups},
           {"tconv_kernel", tconv_kernel},
           {"detection", det_to_json(det)}};
    return j.dump();
}

ModelConfig ModelConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("ModelConfig: bad JSON: ") + e.what());
    }
    ModelConfig c;
    try {
        j.at("input_width").get_to(c.input_width);
        j.at("input_height").get_to(c.input_height);
        j.at("depth_stem_channels").get_to(c.depth_stem_channels);
        j.at("rgb_stem_channels").get_to(c.rgb_stem_channels);
        j.at("encoder_channels").get_to(c.encoder_channels);
        j.at("encoder_blocks").get_to(c.encoder_blocks);
        j.at("bottleneck_channels").get_to(c.bottleneck_channels);
        j.at("decoder_channels").get_to(c.decoder_channels);
        j.at("fpn_channels").get_to(c.fpn_channels);
        j.at("anchor_sizes").get_to(c.anchor_sizes);
        j.at("anchor_ratios").get_to(c.anchor_ratios);
        j.at("num_classes").get_to(c.num_classes);
        j.at("dropout_rate").get_to(c.dropout_rate);
        j.at("multitask").get_to(c.multitask);
        j.at("depth_scale").get_to(c.depth_scale);
        j.at("groupnorm_groups").get_to(c.groupnorm_groups);
        j.at("tconv_kernel").get_to(c.tconv_kernel);
        c.det = det_from_json(j.at("detection"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("ModelConfig: missing or mistyped field: ") + e.what());
    }
    c.validate();
    return c;
}

std::string ModelConfig::config_hash() const {
    return Fnv1a64().update(to_json_string()).hex();
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
    return a.to_json_string() == b.to_json_string();
}

}  // namespace adc
