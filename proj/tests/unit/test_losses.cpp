#include <doctest.h>

#include <cmath>
#include <numeric>

#include "adc/error.hpp"
#include "adc/losses.hpp"
#include "adc/rng.hpp"

using namespace adc;
using namespace adc::losses;

namespace {

DepthMap map_of(int w, int h, float v) {
    DepthMap m(w, h);
    std::fill(m.values.begin(), m.values.end(), v);
    return m;
}

DepthMap random_map(int w, int h, Pcg32& rng, double lo = 1.0, double hi = 20.0) {
    DepthMap m(w, h);
    for (auto& v : m.values) v = static_cast<float>(rng.uniform(lo, hi));
    return m;
}

}  // namespace

TEST_CASE("consistency loss identities") {
    Pcg32 rng(1);
    const DepthMap gt = random_map(6, 5, rng);
    CHECK(consistency_loss(gt, gt, ConsistencyMode::Rmse) == 0.0);
    CHECK(consistency_loss(gt, gt, ConsistencyMode::LiteralEq1) == 0.0);

    DepthMap shifted = gt;
    for (auto& v : shifted.values) v += 2.0f;
    CHECK(consistency_loss(shifted, gt, ConsistencyMode::Rmse) == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(consistency_loss(shifted, gt, ConsistencyMode::LiteralEq1) ==
          doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("consistency loss distinguishes the two formulations on (0,0,0,2)") {
    DepthMap gt = map_of(2, 2, 5.0f);
    DepthMap pred = gt;
    pred.values[3] = 7.0f;  // residuals (0, 0, 0, 2)
    CHECK(consistency_loss(pred, gt, ConsistencyMode::Rmse) == 1.0);
    CHECK(consistency_loss(pred, gt, ConsistencyMode::LiteralEq1) == 0.5);
}

TEST_CASE("consistency loss is masked to gt-valid pixels and errors when empty") {
    DepthMap gt = map_of(3, 3, 4.0f);
    gt.values[0] = 0.0f;  // invalid pixel excluded
    DepthMap pred = map_of(3, 3, 4.0f);
    pred.values[0] = 100.0f;  // must not contribute
    CHECK(consistency_loss(pred, gt) == 0.0);

    const DepthMap empty_gt = map_of(3, 3, 0.0f);
    CHECK_THROWS_AS(consistency_loss(pred, empty_gt), ValidationError);
    CHECK_THROWS_AS(consistency_loss(map_of(2, 2, 1.0f), map_of(3, 3, 1.0f)), ValidationError);
}

TEST_CASE("consistency loss is permutation invariant") {
    Pcg32 rng(3);
    DepthMap gt = random_map(4, 4, rng);
    DepthMap pred = random_map(4, 4, rng);
    const double before = consistency_loss(pred, gt);
    // reverse both rasters with one permutation
    std::reverse(gt.values.begin(), gt.values.end());
    std::reverse(pred.values.begin(), pred.values.end());
    CHECK(consistency_loss(pred, gt) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("smoothness loss identities") {
    SUBCASE("affine plane") {
        DepthMap m(7, 6);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 7; ++x) m.at(x, y) = static_cast<float>(3 * x + 2 * y + 7);
        CHECK(smoothness_loss(m) == 0.0);
    }
    SUBCASE("quadratic ramp contributes exactly 2") {
        DepthMap m(9, 5);
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 9; ++x) m.at(x, y) = static_cast<float>(x * x);
        CHECK(smoothness_loss(m) == 2.0);
    }
    SUBCASE("constant map") { CHECK(smoothness_loss(map_of(5, 5, 3.25f)) == 0.0); }
    SUBCASE("too small map errors") {
        CHECK_THROWS_AS(smoothness_loss(map_of(2, 5, 1.0f)), ValidationError);
        CHECK_THROWS_AS(smoothness_loss(map_of(5, 2, 1.0f)), ValidationError);
    }
}

TEST_CASE("smoothness loss is invariant under adding a constant") {
    Pcg32 rng(4);
    DepthMap m = random_map(8, 8, rng);
    const double before = smoothness_loss(m);
    DepthMap shifted = m;
    for (auto& v : shifted.values) v += 5.0f;
    CHECK(smoothness_loss(shifted) == doctest::Approx(before).epsilon(1e-5));
}

TEST_CASE("analytic gradients match central differences on random 8x8 maps") {
    Pcg32 rng(42);
    const double w_c = 1.0, w_s = 0.1;
    int checked = 0;
    for (int trial = 0; trial < 24; ++trial) {
        const DepthMap gt = random_map(8, 8, rng);
        DepthMap pred = random_map(8, 8, rng);
        const ConsistencyMode mode =
            trial % 2 == 0 ? ConsistencyMode::Rmse : ConsistencyMode::LiteralEq1;

        const auto cons = consistency_loss_with_grad(pred, gt, mode);
        const auto smooth = smoothness_loss_with_grad(pred);

        for (std::size_t i = 0; i < pred.values.size(); ++i) {
            const double analytic = w_c * cons.grad[i] + w_s * smooth.grad[i];
            const float orig = pred.values[i];
            const float hi = orig + 1e-3f;
            const float lo = orig - 1e-3f;
            pred.values[i] = hi;
            const double f_hi =
                w_c * consistency_loss(pred, gt, mode) + w_s * smoothness_loss(pred);
            pred.values[i] = lo;
            const double f_lo =
                w_c * consistency_loss(pred, gt, mode) + w_s * smoothness_loss(pred);
            pred.values[i] = orig;
            const double fd = (f_hi - f_lo) / (static_cast<double>(hi) - static_cast<double>(lo));
            const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-8});
            CHECK(std::abs(analytic - fd) / denom < 1e-3);
            ++checked;
        }
    }
    CHECK(checked >= 20 * 64);
}

TEST_CASE("detection loss composition") {
    CHECK(detection_loss({0.0, 0.0}, 1.0) == 0.0);
    CHECK(detection_loss({1.0, 0.5}, 1.0) == 1.5);
    CHECK(detection_loss({1.0, 0.5}, 2.0) == 2.0);
}

TEST_CASE("total loss composition") {
    LossWeights w;
    w.w_consistency = 1.0;
    w.w_smoothness = 0.1;
    w.w_detection = 1.0;
    CHECK(total_loss({0, 0, 0}, w, true) == 0.0);
    CHECK(total_loss({1, 1, 1}, w, true) == doctest::Approx(2.1).epsilon(1e-12));
    CHECK(total_loss({1, 1, 1}, w, false) == doctest::Approx(1.1).epsilon(1e-12));
    w.w_detection = 123.0;
    CHECK(total_loss({1, 1, 1}, w, false) == doctest::Approx(1.1).epsilon(1e-12));
}
