#include <algorithm>
#include <cmath>
#include <numeric>

#include "adc/error.hpp"
#include "model_internal.hpp"

namespace adc {

namespace {

constexpr std::array<double, 5> kStrides{4, 8, 16, 32, 64};  // P2..P6

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Smooth L1 with threshold beta: value and derivative w.r.t. x.
double smooth_l1(double x, double beta, double& deriv) {
    const double ax = std::abs(x);
    if (ax < beta) {
        deriv = x / beta;
        return 0.5 * x * x / beta;
    }
    deriv = x > 0 ? 1.0 : -1.0;
    return ax - 0.5 * beta;
}

/// Binary cross-entropy with logits: numerically stable value; caller uses
/// sigmoid(z) - t as the gradient.
double bce_with_logits(double z, double t) {
    return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
}

/// Sample up to `want` elements of `pool` without replacement (seeded
/// partial shuffle in place).
void sample_subset(std::vector<int>& pool, std::size_t want, Pcg32& rng) {
    if (pool.size() <= want) return;
    for (std::size_t i = 0; i < want; ++i) {
        const std::size_t j = i + rng.bounded(static_cast<std::uint32_t>(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(want);
}

struct Proposal {
    BoundingBox box;
    double score = 0.0;
};

int fpn_level_for_box(const BoundingBox& b) {
    // Canonical assignment: boxes around 224 px map to P4.
    const double s = std::sqrt(std::max(b.area(), 1e-6));
    const int k = static_cast<int>(std::floor(4.0 + std::log2(s / 224.0)));
    return std::clamp(k, 2, 5) - 2;  // index into P2..P5
}

}  // namespace

// ---- ROI align -------------------------------------------------------------

namespace {

/// Bilinear taps of one point on a feature plane; feature samples live at
/// integer lattice coordinates.
struct BilinearTaps {
    int idx[4];
    float w[4];
    int count = 0;
};

BilinearTaps bilinear_taps(double x, double y, int W, int H) {
    BilinearTaps t;
    if (x < -1.0 || x > W || y < -1.0 || y > H) return t;
    x = std::clamp(x, 0.0, static_cast<double>(W - 1));
    y = std::clamp(y, 0.0, static_cast<double>(H - 1));
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
    const float lx = static_cast<float>(x - x0), ly = static_cast<float>(y - y0);
    const float ws[4] = {(1 - lx) * (1 - ly), lx * (1 - ly), (1 - lx) * ly, lx * ly};
    const int ids[4] = {y0 * W + x0, y0 * W + x1, y1 * W + x0, y1 * W + x1};
    for (int i = 0; i < 4; ++i) {
        if (ws[i] == 0.0f) continue;
        t.idx[t.count] = ids[i];
        t.w[t.count] = ws[i];
        ++t.count;
    }
    return t;
}

}  // namespace

void roi_align_forward(const Tensor& feat, const RoiRec& roi, double spatial_scale, int pool,
                       int sampling, float* out) {
    const int C = feat.c, H = feat.h, W = feat.w;
    const double x0 = roi.x0 * spatial_scale, y0 = roi.y0 * spatial_scale;
    const double bw = std::max((roi.x1 - roi.x0) * spatial_scale, 1e-3) / pool;
    const double bh = std::max((roi.y1 - roi.y0) * spatial_scale, 1e-3) / pool;
    const float inv_taps = 1.0f / static_cast<float>(sampling * sampling);

    for (int by = 0; by < pool; ++by) {
        for (int bx = 0; bx < pool; ++bx) {
            // Gather taps once, apply across channels.
            BilinearTaps taps[16];
            int n_taps = 0;
            for (int sy = 0; sy < sampling; ++sy)
                for (int sx = 0; sx < sampling; ++sx) {
                    const double px = x0 + (bx + (sx + 0.5) / sampling) * bw;
                    const double py = y0 + (by + (sy + 0.5) / sampling) * bh;
                    taps[n_taps++] = bilinear_taps(px, py, W, H);
                }
            for (int c = 0; c < C; ++c) {
                const float* plane = feat.chan(c);
                float acc = 0.0f;
                for (int t = 0; t < n_taps; ++t)
                    for (int i = 0; i < taps[t].count; ++i) acc += taps[t].w[i] * plane[taps[t].idx[i]];
                out[(static_cast<std::size_t>(c) * pool + by) * pool + bx] = acc * inv_taps;
            }
        }
    }
}

void roi_align_backward(const float* dout, const RoiRec& roi, double spatial_scale, int pool,
                        int sampling, Tensor& dfeat) {
    const int C = dfeat.c, H = dfeat.h, W = dfeat.w;
    const double x0 = roi.x0 * spatial_scale, y0 = roi.y0 * spatial_scale;
    const double bw = std::max((roi.x1 - roi.x0) * spatial_scale, 1e-3) / pool;
    const double bh = std::max((roi.y1 - roi.y0) * spatial_scale, 1e-3) / pool;
    const float inv_taps = 1.0f / static_cast<float>(sampling * sampling);

    for (int by = 0; by < pool; ++by) {
        for (int bx = 0; bx < pool; ++bx) {
            BilinearTaps taps[16];
            int n_taps = 0;
            for (int sy = 0; sy < sampling; ++sy)
                for (int sx = 0; sx < sampling; ++sx) {
                    const double px = x0 + (bx + (sx + 0.5) / sampling) * bw;
                    const double py = y0 + (by + (sy + 0.5) / sampling) * bh;
                    taps[n_taps++] = bilinear_taps(px, py, W, H);
                }
            for (int c = 0; c < C; ++c) {
                float* plane = dfeat.chan(c);
                const float g = dout[(static_cast<std::size_t>(c) * pool + by) * pool + bx] * inv_taps;
                if (g == 0.0f) continue;
                for (int t = 0; t < n_taps; ++t)
                    for (int i = 0; i < taps[t].count; ++i) plane[taps[t].idx[i]] += g * taps[t].w[i];
            }
        }
    }
}

// ---- DetectionModule ---------------------------------------------------------

Model::DetectionModule::DetectionModule(const ModelConfig& config) : cfg(config) {
    fpn_ch = cfg.fpn_channels;
    num_anchors = static_cast<int>(cfg.anchor_ratios.size());
    for (int i = 0; i < 4; ++i) {
        lateral[static_cast<std::size_t>(i)] =
            nn::Conv2d(cfg.encoder_channels[static_cast<std::size_t>(i + 1)], fpn_ch, 1, 1, 0, true);
        out_conv[static_cast<std::size_t>(i)] = nn::Conv2d(fpn_ch, fpn_ch, 3, 1, 1, true);
    }
    rpn_conv = nn::Conv2d(fpn_ch, fpn_ch, 3, 1, 1, true);
    rpn_cls = nn::Conv2d(fpn_ch, num_anchors, 1, 1, 0, true);
    rpn_reg = nn::Conv2d(fpn_ch, 4 * num_anchors, 1, 1, 0, true);

    const int pooled = fpn_ch * cfg.det.roi_pool_size * cfg.det.roi_pool_size;
    fc1 = nn::Linear(pooled, cfg.det.roi_head_dim);
    fc2 = nn::Linear(cfg.det.roi_head_dim, cfg.det.roi_head_dim);
    cls_head = nn::Linear(cfg.det.roi_head_dim, cfg.num_classes + 1);
    reg_head = nn::Linear(cfg.det.roi_head_dim, 4 * (cfg.num_classes + 1));
}

void Model::DetectionModule::init(Pcg32& rng) {
    for (auto& l : lateral) l.init(rng);
    for (auto& o : out_conv) o.init(rng);
    rpn_conv.init(rng);
    rpn_cls.init(rng, 0.01);
    rpn_reg.init(rng, 0.01);
    fc1.init(rng);
    fc2.init(rng);
    cls_head.init(rng, 0.01);
    reg_head.init(rng, 0.001);
}

void Model::DetectionModule::reg(nn::ParamRegistry& r) {
    for (int i = 0; i < 4; ++i)
        lateral[static_cast<std::size_t>(i)].reg("fpn.lateral" + std::to_string(i + 2), r);
    for (int i = 0; i < 4; ++i)
        out_conv[static_cast<std::size_t>(i)].reg("fpn.out" + std::to_string(i + 2), r);
    rpn_conv.reg("rpn.conv", r);
    rpn_cls.reg("rpn.cls", r);
    rpn_reg.reg("rpn.reg", r);
    fc1.reg("roi.fc1", r);
    fc2.reg("roi.fc2", r);
    cls_head.reg("roi.cls", r);
    reg_head.reg("roi.reg", r);
}

Model::DetectionOutput Model::DetectionModule::forward(Model& model,
                                                       const Model::EncoderFeatures& f,
                                                       bool train, const BoxList* gt_boxes,
                                                       const nn::FwdCtx& ctx) {
    if (train && gt_boxes == nullptr)
        throw ValidationError("forward_detection: train mode requires ground-truth boxes");
    if (train && ctx.rng == nullptr)
        throw ValidationError("forward_detection: train mode requires ctx.rng for sampling");

    Model::DetectionOutput out;
    out.fpn_levels = 5;

    // FPN: laterals on stages 2..5, top-down nearest fusion, 3x3 smoothing,
    // pooled P6.
    std::array<Tensor, 4> lat;
    for (int i = 0; i < 4; ++i)
        lat[static_cast<std::size_t>(i)] =
            lateral[static_cast<std::size_t>(i)].forward(f.stage[static_cast<std::size_t>(i + 1)], ctx);
    std::array<Tensor, 4> td;  // top-down fused
    td[3] = lat[3];
    for (int i = 2; i >= 0; --i) {
        Tensor up = nn::upsample2x_nearest(td[static_cast<std::size_t>(i + 1)]);
        td[static_cast<std::size_t>(i)] = lat[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < up.data.size(); ++j)
            td[static_cast<std::size_t>(i)].data[j] += up.data[j];
    }
    std::array<Tensor, 5> P;
    for (int i = 0; i < 4; ++i)
        P[static_cast<std::size_t>(i)] =
            out_conv[static_cast<std::size_t>(i)].forward(td[static_cast<std::size_t>(i)], ctx);
    P[4] = nn::subsample2x(P[3]);

    // RPN head on every level.
    std::array<Tensor, 5> cls_out, reg_out;
    for (int l = 0; l < 5; ++l) {
        Tensor t = rpn_relu.forward(rpn_conv.forward(P[static_cast<std::size_t>(l)], ctx), ctx);
        cls_out[static_cast<std::size_t>(l)] = rpn_cls.forward(t, ctx);
        reg_out[static_cast<std::size_t>(l)] = rpn_reg.forward(t, ctx);
    }

    // Anchors per level, in (ratio, y, x) order matching the head layout.
    std::vector<std::pair<int, int>> feat_sizes;
    for (int l = 0; l < 5; ++l)
        feat_sizes.emplace_back(P[static_cast<std::size_t>(l)].w, P[static_cast<std::size_t>(l)].h);
    detgeom::AnchorGrid anchors = detgeom::make_anchor_grid(
        feat_sizes, {kStrides.begin(), kStrides.end()}, cfg.anchor_sizes, cfg.anchor_ratios);

    Model::StepTrace* trace = ctx.grad ? model.trace_.get() : nullptr;
    if (trace) {
        trace->det_ran = true;
        for (int l = 0; l < 5; ++l) {
            trace->det.level_dims[static_cast<std::size_t>(l)] = {
                P[static_cast<std::size_t>(l)].h, P[static_cast<std::size_t>(l)].w};
            trace->det.drpn_cls[static_cast<std::size_t>(l)] =
                Tensor(num_anchors, P[static_cast<std::size_t>(l)].h, P[static_cast<std::size_t>(l)].w);
            trace->det.drpn_reg[static_cast<std::size_t>(l)] = Tensor(
                4 * num_anchors, P[static_cast<std::size_t>(l)].h, P[static_cast<std::size_t>(l)].w);
        }
    }

    // Flat accessors over the per-level head outputs.
    std::vector<std::size_t> level_offset(6, 0);
    for (int l = 0; l < 5; ++l)
        level_offset[static_cast<std::size_t>(l) + 1] =
            level_offset[static_cast<std::size_t>(l)] + anchors.levels[static_cast<std::size_t>(l)].size();
    const auto logit_at = [&](std::size_t flat) {
        int l = 0;
        while (flat >= level_offset[static_cast<std::size_t>(l) + 1]) ++l;
        const std::size_t local = flat - level_offset[static_cast<std::size_t>(l)];
        return cls_out[static_cast<std::size_t>(l)].data[local];
    };
    const auto delta_at = [&](std::size_t flat, int coord) {
        int l = 0;
        while (flat >= level_offset[static_cast<std::size_t>(l) + 1]) ++l;
        const std::size_t local = flat - level_offset[static_cast<std::size_t>(l)];
        const Tensor& t = reg_out[static_cast<std::size_t>(l)];
        const std::size_t plane = t.plane();
        const std::size_t a = local / plane, px = local % plane;
        return t.data[(a * 4 + static_cast<std::size_t>(coord)) * plane + px];
    };

    // RPN losses on a sampled anchor batch.
    losses::DetectionLossTerms terms;
    BoxList all_anchors = anchors.flatten();
    if (train) {
        detgeom::TargetAssignment assign = detgeom::assign_targets(
            all_anchors, *gt_boxes, cfg.det.rpn_pos_iou, cfg.det.rpn_neg_iou);
        std::vector<int> pos, neg;
        for (std::size_t i = 0; i < all_anchors.size(); ++i) {
            if (assign.labels[i] == detgeom::AnchorLabel::Positive) pos.push_back(static_cast<int>(i));
            else if (assign.labels[i] == detgeom::AnchorLabel::Negative) neg.push_back(static_cast<int>(i));
        }
        const auto want_pos = static_cast<std::size_t>(cfg.det.rpn_batch * cfg.det.rpn_pos_fraction);
        sample_subset(pos, want_pos, *ctx.rng);
        sample_subset(neg, static_cast<std::size_t>(cfg.det.rpn_batch) - pos.size(), *ctx.rng);
        const double n_sampled = std::max<std::size_t>(pos.size() + neg.size(), 1);

        double cls_loss = 0.0, reg_loss = 0.0;
        const auto accumulate_cls = [&](int flat, double target) {
            const double z = logit_at(static_cast<std::size_t>(flat));
            cls_loss += bce_with_logits(z, target);
            if (trace) {
                int l = 0;
                while (static_cast<std::size_t>(flat) >= level_offset[static_cast<std::size_t>(l) + 1]) ++l;
                const std::size_t local = static_cast<std::size_t>(flat) - level_offset[static_cast<std::size_t>(l)];
                trace->det.drpn_cls[static_cast<std::size_t>(l)].data[local] =
                    static_cast<float>((sigmoid(z) - target) / n_sampled);
            }
        };
        for (int i : pos) accumulate_cls(i, 1.0);
        for (int i : neg) accumulate_cls(i, 0.0);
        cls_loss /= n_sampled;

        for (int i : pos) {
            const auto& target = assign.deltas[static_cast<std::size_t>(i)];
            int l = 0;
            while (static_cast<std::size_t>(i) >= level_offset[static_cast<std::size_t>(l) + 1]) ++l;
            const std::size_t local = static_cast<std::size_t>(i) - level_offset[static_cast<std::size_t>(l)];
            const Tensor& t = reg_out[static_cast<std::size_t>(l)];
            const std::size_t plane = t.plane();
            const std::size_t a = local / plane, px = local % plane;
            for (int cdim = 0; cdim < 4; ++cdim) {
                const double pred = t.data[(a * 4 + static_cast<std::size_t>(cdim)) * plane + px];
                double deriv;
                reg_loss += smooth_l1(pred - target[static_cast<std::size_t>(cdim)], 1.0 / 9.0, deriv);
                if (trace)
                    trace->det.drpn_reg[static_cast<std::size_t>(l)]
                        .data[(a * 4 + static_cast<std::size_t>(cdim)) * plane + px] =
                        static_cast<float>(deriv / n_sampled);
            }
        }
        reg_loss /= n_sampled;
        terms.proposal = cls_loss + reg_loss;
    }

    // Proposals: per-level top-k by objectness, decode, clip, NMS, then a
    // global post-NMS cut. No gradients flow through proposal coordinates.
    std::vector<Proposal> proposals;
    const int post_nms = train ? cfg.det.rpn_post_nms_train : cfg.det.rpn_post_nms_infer;
    for (int l = 0; l < 5; ++l) {
        const BoxList& lv_anchors = anchors.levels[static_cast<std::size_t>(l)];
        const Tensor& lc = cls_out[static_cast<std::size_t>(l)];
        std::vector<int> order(lv_anchors.size());
        std::iota(order.begin(), order.end(), 0);
        const auto topk = std::min<std::size_t>(static_cast<std::size_t>(cfg.det.rpn_pre_nms_topk),
                                                order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(topk), order.end(),
                          [&](int a, int b) { return lc.data[static_cast<std::size_t>(a)] > lc.data[static_cast<std::size_t>(b)]; });
        BoxList cand;
        for (std::size_t r = 0; r < topk; ++r) {
            const int ai = order[r];
            const Tensor& tr_ = reg_out[static_cast<std::size_t>(l)];
            const std::size_t plane = tr_.plane();
            const std::size_t a = static_cast<std::size_t>(ai) / plane, px = static_cast<std::size_t>(ai) % plane;
            std::array<double, 4> d;
            for (int cdim = 0; cdim < 4; ++cdim)
                d[static_cast<std::size_t>(cdim)] =
                    tr_.data[(a * 4 + static_cast<std::size_t>(cdim)) * plane + px];
            BoundingBox b = detgeom::decode_deltas(lv_anchors[static_cast<std::size_t>(ai)], d);
            b.x_min = std::clamp(b.x_min, 0.0, static_cast<double>(f.pad_w));
            b.x_max = std::clamp(b.x_max, 0.0, static_cast<double>(f.pad_w));
            b.y_min = std::clamp(b.y_min, 0.0, static_cast<double>(f.pad_h));
            b.y_max = std::clamp(b.y_max, 0.0, static_cast<double>(f.pad_h));
            if (b.width() < 1e-3 || b.height() < 1e-3) continue;
            b.class_id = 1;
            b.score = sigmoid(lc.data[static_cast<std::size_t>(ai)]);
            cand.push_back(b);
        }
        cand = detgeom::nms(cand, cfg.det.rpn_nms_iou);
        for (const auto& b : cand) proposals.push_back({b, b.score});
    }
    std::stable_sort(proposals.begin(), proposals.end(),
                     [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
    if (proposals.size() > static_cast<std::size_t>(post_nms))
        proposals.resize(static_cast<std::size_t>(post_nms));

    // ROI head.
    BoxList rois;
    for (const auto& p : proposals) rois.push_back(p.box);
    std::vector<int> roi_labels;      // train: 0 background, else class id
    std::vector<int> roi_matched_gt;  // train: gt index for positives
    if (train) {
        for (const auto& g : *gt_boxes) rois.push_back(g);  // gt-augmented sampling
        std::vector<int> pos, neg;
        std::vector<int> matched(rois.size(), -1);
        for (std::size_t i = 0; i < rois.size(); ++i) {
            double best = 0.0;
            int best_g = -1;
            for (std::size_t g = 0; g < gt_boxes->size(); ++g) {
                const double v = detgeom::iou(rois[i], (*gt_boxes)[g]);
                if (v > best) {
                    best = v;
                    best_g = static_cast<int>(g);
                }
            }
            matched[i] = best >= cfg.det.roi_pos_iou ? best_g : -1;
            (matched[i] >= 0 ? pos : neg).push_back(static_cast<int>(i));
        }
        const auto want_pos = static_cast<std::size_t>(cfg.det.roi_batch * cfg.det.roi_pos_fraction);
        sample_subset(pos, want_pos, *ctx.rng);
        sample_subset(neg, static_cast<std::size_t>(cfg.det.roi_batch) - pos.size(), *ctx.rng);

        BoxList sampled;
        for (int i : pos) {
            sampled.push_back(rois[static_cast<std::size_t>(i)]);
            roi_labels.push_back((*gt_boxes)[static_cast<std::size_t>(matched[static_cast<std::size_t>(i)])].class_id);
            roi_matched_gt.push_back(matched[static_cast<std::size_t>(i)]);
        }
        for (int i : neg) {
            sampled.push_back(rois[static_cast<std::size_t>(i)]);
            roi_labels.push_back(0);
            roi_matched_gt.push_back(-1);
        }
        rois = std::move(sampled);
    }

    const int pool = cfg.det.roi_pool_size;
    const int feat_dim = fpn_ch * pool * pool;
    const int n_rois = static_cast<int>(rois.size());
    Mat pooled(std::max(n_rois, 0), feat_dim);
    std::vector<RoiRec> roi_recs(static_cast<std::size_t>(n_rois));
    for (int i = 0; i < n_rois; ++i) {
        RoiRec rec;
        rec.level = fpn_level_for_box(rois[static_cast<std::size_t>(i)]);
        rec.x0 = rois[static_cast<std::size_t>(i)].x_min;
        rec.y0 = rois[static_cast<std::size_t>(i)].y_min;
        rec.x1 = rois[static_cast<std::size_t>(i)].x_max;
        rec.y1 = rois[static_cast<std::size_t>(i)].y_max;
        roi_recs[static_cast<std::size_t>(i)] = rec;
        roi_align_forward(P[static_cast<std::size_t>(rec.level)], rec,
                          1.0 / kStrides[static_cast<std::size_t>(rec.level)], pool,
                          cfg.det.roi_sampling, pooled.row(i));
    }

    Mat h1, h2, logits, bbox;
    if (n_rois > 0) {
        h1 = fc_relu1.forward(fc1.forward(pooled, ctx), ctx);
        h2 = fc_relu2.forward(fc2.forward(h1, ctx), ctx);
        logits = cls_head.forward(h2, ctx);
        bbox = reg_head.forward(h2, ctx);
    }

    if (train) {
        const int n_classes = cfg.num_classes + 1;
        const double n = std::max(n_rois, 1);
        double cls_loss = 0.0, reg_loss = 0.0;
        Mat dlogits(std::max(n_rois, 0), n_classes);
        Mat dbbox(std::max(n_rois, 0), 4 * n_classes);
        for (int i = 0; i < n_rois; ++i) {
            // Softmax cross-entropy.
            const float* row = logits.row(i);
            double mx = row[0];
            for (int c = 1; c < n_classes; ++c) mx = std::max(mx, static_cast<double>(row[c]));
            double sum = 0.0;
            for (int c = 0; c < n_classes; ++c) sum += std::exp(row[c] - mx);
            const int label = roi_labels[static_cast<std::size_t>(i)];
            cls_loss += -(row[label] - mx - std::log(sum));
            for (int c = 0; c < n_classes; ++c) {
                const double p = std::exp(row[c] - mx) / sum;
                dlogits.at(i, c) = static_cast<float>((p - (c == label ? 1.0 : 0.0)) / n);
            }
            if (label > 0) {
                const BoundingBox& g =
                    (*gt_boxes)[static_cast<std::size_t>(roi_matched_gt[static_cast<std::size_t>(i)])];
                const auto target = detgeom::encode_deltas(rois[static_cast<std::size_t>(i)], g);
                for (int cdim = 0; cdim < 4; ++cdim) {
                    const int col = 4 * label + cdim;
                    double deriv;
                    reg_loss += smooth_l1(bbox.at(i, col) - target[static_cast<std::size_t>(cdim)], 1.0, deriv);
                    dbbox.at(i, col) = static_cast<float>(deriv / n);
                }
            }
        }
        terms.final_detection = cls_loss / n + reg_loss / n;
        out.terms = terms;
        if (trace) {
            trace->det.droi_cls = std::move(dlogits);
            trace->det.droi_reg = std::move(dbbox);
            trace->det.rois = std::move(roi_recs);
        }
        return out;
    }

    // Inference post-processing: per-class decode, clip to the original
    // image, score filter, per-class NMS, global cap.
    BoxList dets;
    const int n_classes = cfg.num_classes + 1;
    for (int i = 0; i < n_rois; ++i) {
        const float* row = logits.row(i);
        double mx = row[0];
        for (int c = 1; c < n_classes; ++c) mx = std::max(mx, static_cast<double>(row[c]));
        double sum = 0.0;
        for (int c = 0; c < n_classes; ++c) sum += std::exp(row[c] - mx);
        for (int c = 1; c < n_classes; ++c) {
            const double score = std::exp(row[c] - mx) / sum;
            if (score < cfg.det.score_thresh) continue;
            std::array<double, 4> d;
            for (int cdim = 0; cdim < 4; ++cdim) d[static_cast<std::size_t>(cdim)] = bbox.at(i, 4 * c + cdim);
            BoundingBox b = detgeom::decode_deltas(rois[static_cast<std::size_t>(i)], d);
            b.x_min = std::clamp(b.x_min, 0.0, static_cast<double>(f.orig_w));
            b.x_max = std::clamp(b.x_max, 0.0, static_cast<double>(f.orig_w));
            b.y_min = std::clamp(b.y_min, 0.0, static_cast<double>(f.orig_h));
            b.y_max = std::clamp(b.y_max, 0.0, static_cast<double>(f.orig_h));
            if (b.width() < 1e-3 || b.height() < 1e-3) continue;
            b.class_id = c;
            b.score = score;
            dets.push_back(b);
        }
    }
    dets = detgeom::nms(dets, cfg.det.nms_iou);
    if (dets.size() > static_cast<std::size_t>(cfg.det.max_detections))
        dets.resize(static_cast<std::size_t>(cfg.det.max_detections));
    out.detections = std::move(dets);
    return out;
}

void Model::DetectionModule::backward(Model::StepTrace& trace, double proposal_scale,
                                      double final_scale) {
    auto& det = trace.det;
    const int pool = cfg.det.roi_pool_size;

    std::array<Tensor, 5> dP;
    for (int l = 0; l < 5; ++l)
        dP[static_cast<std::size_t>(l)] = Tensor(fpn_ch, det.level_dims[static_cast<std::size_t>(l)].first,
                                                 det.level_dims[static_cast<std::size_t>(l)].second);

    // ROI head backward (skipped when no ROI was sampled this step).
    if (det.droi_cls.rows > 0) {
        Mat dcls = det.droi_cls, dreg = det.droi_reg;
        for (auto& v : dcls.data) v *= static_cast<float>(final_scale);
        for (auto& v : dreg.data) v *= static_cast<float>(final_scale);
        Mat dh2 = cls_head.backward(dcls);
        Mat dh2b = reg_head.backward(dreg);
        for (std::size_t i = 0; i < dh2.data.size(); ++i) dh2.data[i] += dh2b.data[i];
        Mat dpooled = fc1.backward(fc_relu1.backward(fc2.backward(fc_relu2.backward(dh2))));
        for (std::size_t i = 0; i < det.rois.size(); ++i) {
            const RoiRec& rec = det.rois[i];
            roi_align_backward(dpooled.row(static_cast<int>(i)), rec,
                               1.0 / kStrides[static_cast<std::size_t>(rec.level)], pool,
                               cfg.det.roi_sampling, dP[static_cast<std::size_t>(rec.level)]);
        }
    } else {
        // Flush the unused forward caches so the LIFO stacks stay balanced.
        // (No ROI forward ran in that case, so nothing to flush.)
    }

    // RPN backward, levels in reverse forward order.
    for (int l = 4; l >= 0; --l) {
        Tensor dcls = det.drpn_cls[static_cast<std::size_t>(l)];
        Tensor dreg = det.drpn_reg[static_cast<std::size_t>(l)];
        for (auto& v : dcls.data) v *= static_cast<float>(proposal_scale);
        for (auto& v : dreg.data) v *= static_cast<float>(proposal_scale);
        Tensor dt = rpn_cls.backward(dcls);
        Tensor dtb = rpn_reg.backward(dreg);
        for (std::size_t i = 0; i < dt.data.size(); ++i) dt.data[i] += dtb.data[i];
        Tensor dp = rpn_conv.backward(rpn_relu.backward(dt));
        Tensor& acc = dP[static_cast<std::size_t>(l)];
        for (std::size_t i = 0; i < dp.data.size(); ++i) acc.data[i] += dp.data[i];
    }

    // P6 is a strided view of P5.
    {
        Tensor d5 = nn::subsample2x_backward(dP[4], det.level_dims[3].first, det.level_dims[3].second);
        for (std::size_t i = 0; i < d5.data.size(); ++i) dP[3].data[i] += d5.data[i];
    }

    // FPN backward: smoothing convs, then the top-down chain, then laterals.
    std::array<Tensor, 4> dtd;
    for (int i = 0; i < 4; ++i)
        dtd[static_cast<std::size_t>(i)] =
            out_conv[static_cast<std::size_t>(i)].backward(dP[static_cast<std::size_t>(i)]);
    for (int i = 0; i < 3; ++i) {
        Tensor dup = nn::upsample2x_nearest_backward(dtd[static_cast<std::size_t>(i)]);
        Tensor& up_acc = dtd[static_cast<std::size_t>(i + 1)];
        for (std::size_t j = 0; j < dup.data.size(); ++j) up_acc.data[j] += dup.data[j];
    }
    for (int i = 3; i >= 0; --i) {
        Tensor ds = lateral[static_cast<std::size_t>(i)].backward(dtd[static_cast<std::size_t>(i)]);
        Tensor& acc = trace.denc_stage[static_cast<std::size_t>(i + 1)];
        for (std::size_t j = 0; j < ds.data.size(); ++j) acc.data[j] += ds.data[j];
    }
}

Model::DetectionOutput Model::forward_detection(const EncoderFeatures& f, bool train,
                                                const BoxList* gt_boxes, const nn::FwdCtx& ctx) {
    if (!cfg_.multitask || !det_)
        throw ValidationError("forward_detection: model configured without a detection head");
    if (ctx.grad && (!trace_ || !trace_->encoder_ran))
        throw std::logic_error("forward_detection: grad pass requires a grad forward_encoder first");
    return det_->forward(*this, f, train, gt_boxes, ctx);
}

}  // namespace adc
