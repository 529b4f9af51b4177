#include <doctest.h>

#include "adc/degrade.hpp"
#include "adc/error.hpp"
#include "adc/scenegen.hpp"
#include "adc/uncertainty.hpp"

using namespace adc;
using namespace adc::uncertainty;

namespace {

ModelConfig tiny_config(double dropout) {
    ModelConfig cfg;
    cfg.input_width = 64;
    cfg.input_height = 64;
    cfg.depth_stem_channels = 4;
    cfg.rgb_stem_channels = 4;
    cfg.encoder_channels = {8, 8, 16, 16, 16};
    cfg.encoder_blocks = {1, 1, 1, 1, 1};
    cfg.bottleneck_channels = 16;
    cfg.decoder_channels = {16, 8, 8, 8, 8};
    cfg.fpn_channels = 8;
    cfg.multitask = false;
    cfg.dropout_rate = dropout;
    return cfg;
}

Sample tiny_sample(std::uint64_t seed) {
    scenegen::GeneratorParams p;
    p.width = 64;
    p.height = 64;
    Sample s = scenegen::render(scenegen::sample_scene(seed, p));
    s.sparse_depth = degrade::sparsify(s.dense_depth, 0.02, seed);
    return s;
}

DepthMap pass_of(float a, float b) {
    DepthMap m(2, 1);
    m.values = {a, b};
    return m;
}

}  // namespace

TEST_CASE("gaussian fit hand case: passes {1,3} give mean 2 variance 1") {
    const UncertaintyMap u = fit_gaussian({pass_of(1.0f, 5.0f), pass_of(3.0f, 5.0f)});
    CHECK(u.mean[0] == 2.0f);
    CHECK(u.variance[0] == 1.0f);  // population variance: ((1-2)^2 + (3-2)^2)/2
    CHECK(u.mean[1] == 5.0f);
    CHECK(u.variance[1] == 0.0f);
    CHECK(u.n_passes == 2);
}

TEST_CASE("single pass yields zero variance and the pass itself as mean") {
    const UncertaintyMap u = fit_gaussian({pass_of(4.0f, 7.0f)});
    CHECK(u.variance[0] == 0.0f);
    CHECK(u.variance[1] == 0.0f);
    CHECK(u.mean[0] == 4.0f);
    CHECK(u.mean[1] == 7.0f);
}

TEST_CASE("dropout rate zero gives identically zero variance and the deterministic mean") {
    Model model(tiny_config(0.0));
    model.init_params(5);
    const Sample s = tiny_sample(40);
    const UncertaintyMap u = mc_dropout_predict(model, s.rgb, s.sparse_depth, 5, 99);
    const DepthMap det = model.predict(s.rgb, s.sparse_depth).depth;
    for (std::size_t i = 0; i < u.variance.size(); ++i) {
        REQUIRE(u.variance[i] == 0.0f);
        REQUIRE(u.mean[i] == det.values[i]);
    }
}

TEST_CASE("active dropout produces nonzero variance, reproducibly") {
    Model model(tiny_config(0.2));
    model.init_params(6);
    const Sample s = tiny_sample(41);
    const UncertaintyMap a = mc_dropout_predict(model, s.rgb, s.sparse_depth, 6, 1000);
    const UncertaintyMap b = mc_dropout_predict(model, s.rgb, s.sparse_depth, 6, 1000);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);

    std::size_t nonzero = 0;
    for (float v : a.variance) {
        REQUIRE(v >= 0.0f);
        if (v > 0.0f) ++nonzero;
    }
    CHECK(nonzero > a.variance.size() / 2);

    const UncertaintyMap c = mc_dropout_predict(model, s.rgb, s.sparse_depth, 6, 1001);
    CHECK(a.variance != c.variance);
}

TEST_CASE("n_passes below one is rejected") {
    Model model(tiny_config(0.2));
    model.init_params(7);
    const Sample s = tiny_sample(42);
    CHECK_THROWS_AS(mc_dropout_predict(model, s.rgb, s.sparse_depth, 0, 1), ValidationError);
}

TEST_CASE("summarize_uncertainty region arithmetic") {
    UncertaintyMap u;
    u.width = 10;
    u.height = 10;
    u.n_passes = 2;
    u.mean.assign(100, 1.0f);
    BoundingBox b;
    b.x_min = 2;
    b.y_min = 2;
    b.x_max = 5;
    b.y_max = 5;

    SUBCASE("constant variance: inside equals outside") {
        u.variance.assign(100, 3.0f);
        const RegionVariance rv = summarize_uncertainty(u, {b});
        CHECK(rv.inside_mean == doctest::Approx(3.0));
        CHECK(rv.outside_mean == doctest::Approx(3.0));
        CHECK(rv.ratio == doctest::Approx(1.0));
    }
    SUBCASE("variance 1 inside and 4 outside gives ratio 0.25") {
        u.variance.assign(100, 4.0f);
        for (int y = 0; y < 10; ++y)
            for (int x = 0; x < 10; ++x)
                if (b.contains_pixel(x, y)) u.variance[static_cast<std::size_t>(y) * 10 + x] = 1.0f;
        const RegionVariance rv = summarize_uncertainty(u, {b});
        CHECK(rv.inside_mean == doctest::Approx(1.0));
        CHECK(rv.outside_mean == doctest::Approx(4.0));
        CHECK(rv.ratio == doctest::Approx(0.25));
        CHECK(rv.inside_pixels == 9);
        CHECK(rv.outside_pixels == 91);
    }
    SUBCASE("no boxes is an error") {
        u.variance.assign(100, 1.0f);
        CHECK_THROWS_AS(summarize_uncertainty(u, {}), ValidationError);
    }
    SUBCASE("boxes covering the whole image are an error") {
        u.variance.assign(100, 1.0f);
        BoundingBox all;
        all.x_min = 0;
        all.y_min = 0;
        all.x_max = 10;
        all.y_max = 10;
        CHECK_THROWS_AS(summarize_uncertainty(u, {all}), ValidationError);
    }
    SUBCASE("zero variance everywhere: ratio undefined") {
        u.variance.assign(100, 0.0f);
        const RegionVariance rv = summarize_uncertainty(u, {b});
        CHECK(!rv.ratio_defined);
    }
}
