#pragma once

#include <array>
#include <utility>
#include <vector>

#include "adc/box.hpp"

namespace adc::detgeom {

/// Intersection-over-union of two boxes, in [0, 1].
double iou(const BoundingBox& a, const BoundingBox& b);

/// Total order used to break score ties in NMS: score descending, then box
/// coordinates (x_min, y_min, x_max, y_max) lexicographically ascending,
/// then class_id. Makes the greedy keep-set unique and oracle-checkable.
bool nms_before(const BoundingBox& a, const BoundingBox& b);

/// Greedy per-class non-maximum suppression. Boxes are visited in
/// `nms_before` order; a box is kept unless it overlaps an already kept box
/// of the same class with IoU > iou_threshold. Output keeps visit order.
BoxList nms(const BoxList& dets, double iou_threshold);

/// Anchors for one pyramid level: `size` at every lattice cell of a
/// stride-spaced grid, one box per aspect ratio, centered at
/// ((x + 0.5) * stride, (y + 0.5) * stride). Anchors may extend beyond the
/// image; order is ratio-major, then row, then column.
BoxList make_anchors(int feat_w, int feat_h, double stride, double size,
                     const std::vector<double>& ratios);

struct AnchorGrid {
    std::vector<BoxList> levels;  // one list per FPN level

    BoxList flatten() const;
    std::size_t total() const;
};

/// Per-FPN-level anchor grids. `feat_sizes` are (w, h) per level.
AnchorGrid make_anchor_grid(const std::vector<std::pair<int, int>>& feat_sizes,
                            const std::vector<double>& strides,
                            const std::vector<double>& sizes,
                            const std::vector<double>& ratios);

enum class AnchorLabel : signed char { Negative = 0, Positive = 1, Ignore = -1 };

struct TargetAssignment {
    std::vector<AnchorLabel> labels;       // one per anchor
    std::vector<int> matched_gt;           // gt index for positives, -1 otherwise
    std::vector<std::array<double, 4>> deltas;  // regression target for positives
};

/// Standard center/size log-delta encoding of `gt` relative to `anchor`.
std::array<double, 4> encode_deltas(const BoundingBox& anchor, const BoundingBox& gt);

/// Inverse of encode_deltas.
BoundingBox decode_deltas(const BoundingBox& anchor, const std::array<double, 4>& d);

/// Anchor labeling for RPN training. An anchor is positive iff its IoU with
/// some gt is >= pos_thr, or it attains the best IoU for a gt (ties share);
/// negative iff its best IoU is < neg_thr; everything else is ignored.
/// Positive and negative sets are disjoint by construction.
TargetAssignment assign_targets(const BoxList& anchors, const BoxList& gt,
                                double pos_thr = 0.7, double neg_thr = 0.3);

/// All-point interpolated average precision at one IoU threshold for a
/// single class. Detections are ranked by `nms_before`; each detection
/// greedily matches the unmatched gt with the highest IoU >= iou_thr.
/// Returns 0 when gt is empty.
double average_precision(const BoxList& dets, const BoxList& gt, double iou_thr = 0.5);

}  // namespace adc::detgeom
