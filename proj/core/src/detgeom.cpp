#include "adc/detgeom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace adc::detgeom {

double iou(const BoundingBox& a, const BoundingBox& b) {
    const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

bool nms_before(const BoundingBox& a, const BoundingBox& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.x_min != b.x_min) return a.x_min < b.x_min;
    if (a.y_min != b.y_min) return a.y_min < b.y_min;
    if (a.x_max != b.x_max) return a.x_max < b.x_max;
    if (a.y_max != b.y_max) return a.y_max < b.y_max;
    return a.class_id < b.class_id;
}

BoxList nms(const BoxList& dets, double iou_threshold) {
    BoxList sorted = dets;
    std::stable_sort(sorted.begin(), sorted.end(), nms_before);
    BoxList kept;
    kept.reserve(sorted.size());
    for (const auto& cand : sorted) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (k.class_id == cand.class_id && iou(k, cand) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(cand);
    }
    return kept;
}

BoxList make_anchors(int feat_w, int feat_h, double stride, double size,
                     const std::vector<double>& ratios) {
    BoxList out;
    out.reserve(static_cast<std::size_t>(feat_w) * feat_h * ratios.size());
    for (double r : ratios) {
        // ratio = h / w at constant area size^2
        const double w = size / std::sqrt(r);
        const double h = size * std::sqrt(r);
        for (int y = 0; y < feat_h; ++y) {
            for (int x = 0; x < feat_w; ++x) {
                const double cx = (x + 0.5) * stride;
                const double cy = (y + 0.5) * stride;
                BoundingBox b;
                b.x_min = cx - 0.5 * w;
                b.x_max = cx + 0.5 * w;
                b.y_min = cy - 0.5 * h;
                b.y_max = cy + 0.5 * h;
                out.push_back(b);
            }
        }
    }
    return out;
}

BoxList AnchorGrid::flatten() const {
    BoxList all;
    all.reserve(total());
    for (const auto& lv : levels) all.insert(all.end(), lv.begin(), lv.end());
    return all;
}

std::size_t AnchorGrid::total() const {
    std::size_t n = 0;
    for (const auto& lv : levels) n += lv.size();
    return n;
}

AnchorGrid make_anchor_grid(const std::vector<std::pair<int, int>>& feat_sizes,
                            const std::vector<double>& strides,
                            const std::vector<double>& sizes,
                            const std::vector<double>& ratios) {
    AnchorGrid grid;
    grid.levels.reserve(feat_sizes.size());
    for (std::size_t i = 0; i < feat_sizes.size(); ++i) {
        grid.levels.push_back(
            make_anchors(feat_sizes[i].first, feat_sizes[i].second, strides[i], sizes[i], ratios));
    }
    return grid;
}

std::array<double, 4> encode_deltas(const BoundingBox& anchor, const BoundingBox& gt) {
    const double aw = anchor.width(), ah = anchor.height();
    const double acx = anchor.x_min + 0.5 * aw, acy = anchor.y_min + 0.5 * ah;
    const double gw = gt.width(), gh = gt.height();
    const double gcx = gt.x_min + 0.5 * gw, gcy = gt.y_min + 0.5 * gh;
    return {(gcx - acx) / aw, (gcy - acy) / ah, std::log(gw / aw), std::log(gh / ah)};
}

BoundingBox decode_deltas(const BoundingBox& anchor, const std::array<double, 4>& d) {
    const double aw = anchor.width(), ah = anchor.height();
    const double acx = anchor.x_min + 0.5 * aw, acy = anchor.y_min + 0.5 * ah;
    const double cx = acx + d[0] * aw;
    const double cy = acy + d[1] * ah;
    const double w = aw * std::exp(d[2]);
    const double h = ah * std::exp(d[3]);
    BoundingBox out;
    out.x_min = cx - 0.5 * w;
    out.x_max = cx + 0.5 * w;
    out.y_min = cy - 0.5 * h;
    out.y_max = cy + 0.5 * h;
    return out;
}

TargetAssignment assign_targets(const BoxList& anchors, const BoxList& gt,
                                double pos_thr, double neg_thr) {
    const std::size_t na = anchors.size(), ng = gt.size();
    TargetAssignment out;
    out.labels.assign(na, AnchorLabel::Negative);
    out.matched_gt.assign(na, -1);
    out.deltas.assign(na, {0.0, 0.0, 0.0, 0.0});
    if (ng == 0) return out;

    std::vector<double> best_iou(na, 0.0);
    std::vector<double> gt_best(ng, 0.0);
    std::vector<std::vector<double>> overlap(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        overlap[g].resize(na);
        for (std::size_t a = 0; a < na; ++a) {
            const double v = iou(anchors[a], gt[g]);
            overlap[g][a] = v;
            if (v > best_iou[a]) {
                best_iou[a] = v;
                out.matched_gt[a] = static_cast<int>(g);
            }
            gt_best[g] = std::max(gt_best[g], v);
        }
    }

    for (std::size_t a = 0; a < na; ++a) {
        if (best_iou[a] >= pos_thr)
            out.labels[a] = AnchorLabel::Positive;
        else if (best_iou[a] < neg_thr)
            out.labels[a] = AnchorLabel::Negative;
        else
            out.labels[a] = AnchorLabel::Ignore;
    }
    // Every gt recruits its best-overlap anchors (ties share), so no gt is
    // left without a positive anchor.
    for (std::size_t g = 0; g < ng; ++g) {
        if (gt_best[g] <= 0.0) continue;
        for (std::size_t a = 0; a < na; ++a) {
            if (overlap[g][a] == gt_best[g]) {
                out.labels[a] = AnchorLabel::Positive;
                out.matched_gt[a] = static_cast<int>(g);
            }
        }
    }
    for (std::size_t a = 0; a < na; ++a) {
        if (out.labels[a] == AnchorLabel::Positive)
            out.deltas[a] = encode_deltas(anchors[a], gt[static_cast<std::size_t>(out.matched_gt[a])]);
        else
            out.matched_gt[a] = -1;
    }
    return out;
}

double average_precision(const BoxList& dets, const BoxList& gt, double iou_thr) {
    if (gt.empty()) return 0.0;
    BoxList ranked = dets;
    std::stable_sort(ranked.begin(), ranked.end(), nms_before);

    std::vector<bool> gt_used(gt.size(), false);
    std::vector<int> tp(ranked.size(), 0);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        double best = iou_thr;
        int best_g = -1;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (gt_used[g]) continue;
            const double v = iou(ranked[i], gt[g]);
            if (v >= best) {
                best = v;
                best_g = static_cast<int>(g);
            }
        }
        if (best_g >= 0) {
            gt_used[static_cast<std::size_t>(best_g)] = true;
            tp[i] = 1;
        }
    }

    // Precision/recall curve, then all-point interpolation: AP is the sum of
    // recall increments times the max precision at recall >= that point.
    const double npos = static_cast<double>(gt.size());
    std::vector<double> precision(ranked.size()), recall(ranked.size());
    int cum_tp = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        cum_tp += tp[i];
        precision[i] = static_cast<double>(cum_tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(cum_tp) / npos;
    }
    for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i)
        precision[static_cast<std::size_t>(i)] =
            std::max(precision[static_cast<std::size_t>(i)], precision[static_cast<std::size_t>(i) + 1]);

    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (recall[i] > prev_recall) {
            ap += (recall[i] - prev_recall) * precision[i];
            prev_recall = recall[i];
        }
    }
    return ap;
}

}  // namespace adc::detgeom
