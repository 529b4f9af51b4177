#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "adc/detgeom.hpp"
#include "adc/rng.hpp"

using namespace adc;
using namespace adc::detgeom;

namespace {

BoundingBox box(double x0, double y0, double x1, double y1, int cls = 1, double score = 1.0) {
    BoundingBox b;
    b.x_min = x0;
    b.y_min = y0;
    b.x_max = x1;
    b.y_max = y1;
    b.class_id = cls;
    b.score = score;
    return b;
}

BoundingBox random_box(Pcg32& rng, double extent, int n_classes, bool quantize_scores) {
    const double x0 = rng.uniform(0.0, extent - 2.0);
    const double y0 = rng.uniform(0.0, extent - 2.0);
    BoundingBox b = box(x0, y0, x0 + rng.uniform(1.0, extent / 2), y0 + rng.uniform(1.0, extent / 2));
    b.class_id = 1 + static_cast<int>(rng.bounded(static_cast<std::uint32_t>(n_classes)));
    // Coarse scores force ties through the documented tie-break order.
    b.score = quantize_scores ? rng.bounded(5) / 4.0 : rng.next_double();
    return b;
}

/// Deliberately naive NMS: repeatedly select the first remaining candidate in
/// nms_before order by linear scan, then mark same-class overlaps suppressed.
BoxList nms_reference(const BoxList& dets, double thr) {
    std::vector<bool> removed(dets.size(), false);
    BoxList kept;
    for (;;) {
        int best = -1;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (removed[i]) continue;
            if (best < 0 || nms_before(dets[i], dets[static_cast<std::size_t>(best)]))
                best = static_cast<int>(i);
        }
        if (best < 0) break;
        removed[static_cast<std::size_t>(best)] = true;
        kept.push_back(dets[static_cast<std::size_t>(best)]);
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (removed[i] || dets[i].class_id != kept.back().class_id) continue;
            if (iou(kept.back(), dets[i]) > thr) removed[i] = true;
        }
    }
    return kept;
}

}  // namespace

TEST_CASE("iou hand cases") {
    CHECK(iou(box(0, 0, 10, 10), box(0, 0, 10, 10)) == 1.0);
    CHECK(iou(box(0, 0, 10, 10), box(20, 20, 30, 30)) == 0.0);
    CHECK(iou(box(0, 0, 10, 10), box(5, 5, 15, 15)) == 25.0 / 175.0);
    CHECK(iou(box(0, 0, 10, 10), box(5, 5, 15, 15)) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("iou symmetry and translation monotonicity") {
    Pcg32 rng(7);
    for (int i = 0; i < 100; ++i) {
        const BoundingBox a = random_box(rng, 50, 1, false);
        const BoundingBox b = random_box(rng, 50, 1, false);
        CHECK(iou(a, b) == iou(b, a));
        CHECK(iou(a, a) == 1.0);
    }
    // Sliding a copy of the box along +x strictly reduces overlap until disjoint.
    const BoundingBox base = box(10, 10, 20, 18);
    double prev = 1.0;
    for (double shift = 1.0; shift <= 12.0; shift += 1.0) {
        BoundingBox moved = base;
        moved.x_min += shift;
        moved.x_max += shift;
        const double v = iou(base, moved);
        CHECK(v <= prev);
        prev = v;
    }
    CHECK(prev == 0.0);
}

TEST_CASE("nms keeps a single box and drops an identical lower-scored one") {
    const BoxList one{box(0, 0, 5, 5, 1, 0.7)};
    CHECK(nms(one, 0.5).size() == 1);

    BoxList two{box(0, 0, 5, 5, 1, 0.9), box(0, 0, 5, 5, 1, 0.8)};
    const BoxList kept = nms(two, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == 0.9);
}

TEST_CASE("nms matches the exhaustive reference on 200 random sets") {
    Pcg32 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.bounded(30));
        BoxList dets;
        for (int i = 0; i < n; ++i) dets.push_back(random_box(rng, 40, 2, trial % 2 == 0));
        const double thr = rng.uniform(0.2, 0.7);
        const BoxList fast = nms(dets, thr);
        const BoxList ref = nms_reference(dets, thr);
        REQUIRE(fast.size() == ref.size());
        for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == ref[i]);
    }
}

TEST_CASE("nms output is a subset and is invariant to positive score scaling") {
    Pcg32 rng(123);
    BoxList dets;
    for (int i = 0; i < 25; ++i) dets.push_back(random_box(rng, 40, 2, false));
    const BoxList kept = nms(dets, 0.4);
    for (const auto& k : kept)
        CHECK(std::find(dets.begin(), dets.end(), k) != dets.end());
    // post-NMS invariant: no same-class surviving pair above the threshold
    for (std::size_t i = 0; i < kept.size(); ++i)
        for (std::size_t j = i + 1; j < kept.size(); ++j)
            if (kept[i].class_id == kept[j].class_id) CHECK(iou(kept[i], kept[j]) <= 0.4);

    BoxList scaled = dets;
    for (auto& d : scaled) d.score *= 2.5;
    const BoxList kept2 = nms(scaled, 0.4);
    REQUIRE(kept2.size() == kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        CHECK(kept2[i].x_min == kept[i].x_min);
        CHECK(kept2[i].y_min == kept[i].y_min);
    }
}

TEST_CASE("anchor centers sit on the stride lattice") {
    const auto anchors = make_anchors(8, 6, 16.0, 32.0, {0.5, 1.0, 2.0});
    REQUIRE(anchors.size() == 8u * 6u * 3u);
    for (const auto& a : anchors) {
        const double cx = 0.5 * (a.x_min + a.x_max);
        const double cy = 0.5 * (a.y_min + a.y_max);
        CHECK(std::abs(std::remainder(cx - 8.0, 16.0)) < 1e-9);
        CHECK(std::abs(std::remainder(cy - 8.0, 16.0)) < 1e-9);
        CHECK(a.area() == doctest::Approx(32.0 * 32.0).epsilon(1e-12));
    }
}

TEST_CASE("delta encoding round-trips") {
    Pcg32 rng(5);
    for (int i = 0; i < 200; ++i) {
        const BoundingBox a = random_box(rng, 60, 1, false);
        const BoundingBox g = random_box(rng, 60, 1, false);
        const BoundingBox back = decode_deltas(a, encode_deltas(a, g));
        CHECK(back.x_min == doctest::Approx(g.x_min).epsilon(1e-9));
        CHECK(back.y_max == doctest::Approx(g.y_max).epsilon(1e-9));
    }
}

TEST_CASE("assign_targets basic contracts") {
    const auto grid = make_anchor_grid({{16, 16}}, {4.0}, {16.0}, {0.5, 1.0, 2.0});
    const BoxList anchors = grid.flatten();

    SUBCASE("no gt: every anchor is negative") {
        const auto t = assign_targets(anchors, {});
        for (const auto lbl : t.labels) CHECK(lbl == AnchorLabel::Negative);
    }

    SUBCASE("anchor equal to gt is positive with zero deltas") {
        BoxList gt{anchors[40]};
        gt[0].class_id = 1;
        const auto t = assign_targets(anchors, gt);
        CHECK(t.labels[40] == AnchorLabel::Positive);
        for (double d : t.deltas[40]) CHECK(d == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("every gt has at least one positive anchor, 100 randomized cases") {
        Pcg32 rng(2024);
        for (int trial = 0; trial < 100; ++trial) {
            BoxList gt;
            const int n = 1 + static_cast<int>(rng.bounded(4));
            for (int i = 0; i < n; ++i) {
                const double x0 = rng.uniform(0.0, 48.0);
                const double y0 = rng.uniform(0.0, 48.0);
                gt.push_back(box(x0, y0, x0 + rng.uniform(4.0, 16.0), y0 + rng.uniform(4.0, 16.0)));
            }
            const auto t = assign_targets(anchors, gt);
            std::vector<bool> covered(gt.size(), false);
            for (std::size_t a = 0; a < anchors.size(); ++a)
                if (t.labels[a] == AnchorLabel::Positive && t.matched_gt[a] >= 0)
                    covered[static_cast<std::size_t>(t.matched_gt[a])] = true;
            for (bool c : covered) CHECK(c);
        }
    }
}

TEST_CASE("average precision hand cases") {
    const BoundingBox g1 = box(0, 0, 10, 10);
    const BoundingBox g2 = box(30, 30, 42, 40);

    SUBCASE("perfect single detection") {
        CHECK(average_precision({box(0, 0, 10, 10, 1, 0.8)}, {g1}) == 1.0);
    }
    SUBCASE("no detections") { CHECK(average_precision({}, {g1, g2}) == 0.0); }
    SUBCASE("hit, miss, hit gives 5/6") {
        BoxList dets{box(0, 0, 10, 10, 1, 0.9),     // matches g1
                     box(100, 100, 110, 110, 1, 0.8),  // matches nothing
                     box(30, 30, 42, 40, 1, 0.7)};  // matches g2
        CHECK(average_precision(dets, {g1, g2}) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    }
}
