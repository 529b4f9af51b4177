#include <doctest.h>

#include <cmath>

#include "adc/dataio.hpp"
#include "adc/degrade.hpp"
#include "adc/detgeom.hpp"
#include "adc/error.hpp"
#include "adc/harness.hpp"
#include "adc/model.hpp"
#include "adc/rng.hpp"
#include "adc/scenegen.hpp"
#include "test_util.hpp"

using namespace adc;
using namespace adc::harness;

namespace {

DepthMap const_map(int w, int h, float v) {
    DepthMap m(w, h);
    std::fill(m.values.begin(), m.values.end(), v);
    return m;
}

ModelConfig tiny_config(bool multitask) {
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
    cfg.multitask = multitask;
    cfg.dropout_rate = 0.1;
    cfg.det.roi_head_dim = 32;
    return cfg;
}

}  // namespace

TEST_CASE("depth metrics identities") {
    Pcg32 rng(1);
    DepthMap gt(6, 5);
    for (auto& v : gt.values) v = static_cast<float>(rng.uniform(2.0, 30.0));

    SUBCASE("pred == gt") {
        const DepthMetrics m = depth_metrics(gt, gt);
        CHECK(m.rmse == 0.0);
        CHECK(m.mae == 0.0);
        CHECK(m.rel == 0.0);
        CHECK(m.delta1 == 1.0);
        CHECK(m.delta2 == 1.0);
        CHECK(m.delta3 == 1.0);
    }
    SUBCASE("pred = 1.3 gt fails delta1 but passes delta2") {
        DepthMap pred = gt;
        for (auto& v : pred.values) v *= 1.3f;
        const DepthMetrics m = depth_metrics(pred, gt);
        CHECK(m.delta1 == 0.0);
        CHECK(m.delta2 == 1.0);  // 1.3 < 1.5625
        CHECK(m.delta3 == 1.0);
    }
    SUBCASE("single pixel gt=10 pred=12") {
        const DepthMetrics m = depth_metrics(const_map(1, 1, 12.0f), const_map(1, 1, 10.0f));
        CHECK(m.rmse == doctest::Approx(2.0).epsilon(1e-7));
        CHECK(m.mae == doctest::Approx(2.0).epsilon(1e-7));
        CHECK(m.rel == doctest::Approx(0.2).epsilon(1e-7));
    }
}

TEST_CASE("rmse dominates mae and deltas are monotone") {
    Pcg32 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        DepthMap gt(8, 8), pred(8, 8);
        for (auto& v : gt.values) v = static_cast<float>(rng.uniform(1.0, 50.0));
        for (std::size_t i = 0; i < pred.values.size(); ++i)
            pred.values[i] = static_cast<float>(gt.values[i] * rng.uniform(0.5, 2.0));
        const DepthMetrics m = depth_metrics(pred, gt);
        CHECK(m.rmse >= m.mae);
        CHECK(m.delta1 <= m.delta2);
        CHECK(m.delta2 <= m.delta3);
    }
}

TEST_CASE("region restriction and empty-region error") {
    DepthMap gt = const_map(4, 4, 10.0f);
    DepthMap pred = const_map(4, 4, 10.0f);
    pred.values[0] = 20.0f;  // error only at pixel 0

    std::vector<std::uint8_t> only_first(16, 0);
    only_first[0] = 1;
    CHECK(depth_metrics(pred, gt, &only_first).rmse == doctest::Approx(10.0));

    std::vector<std::uint8_t> rest(16, 1);
    rest[0] = 0;
    CHECK(depth_metrics(pred, gt, &rest).rmse == 0.0);

    std::vector<std::uint8_t> empty(16, 0);
    CHECK_THROWS_AS(depth_metrics(pred, gt, &empty), ValidationError);
    // gt-invalid everywhere also empties the region
    CHECK_THROWS_AS(depth_metrics(pred, const_map(4, 4, 0.0f)), ValidationError);
}

TEST_CASE("cross-image mAP agrees with single-image AP and handles two classes") {
    const auto box = [](double x0, double y0, double x1, double y1, int cls, double score) {
        BoundingBox b;
        b.x_min = x0;
        b.y_min = y0;
        b.x_max = x1;
        b.y_max = y1;
        b.class_id = cls;
        b.score = score;
        return b;
    };
    const BoundingBox g1 = box(0, 0, 10, 10, 1, 1.0);
    const BoundingBox g2 = box(30, 30, 42, 40, 1, 1.0);
    BoxList dets{box(0, 0, 10, 10, 1, 0.9), box(100, 100, 110, 110, 1, 0.8),
                 box(30, 30, 42, 40, 1, 0.7)};
    CHECK(mean_average_precision({dets}, {{g1, g2}}, 0.5) ==
          doctest::Approx(detgeom::average_precision(dets, {g1, g2}, 0.5)).epsilon(1e-12));

    // Two classes, one perfectly detected, one missed: mAP = (1 + 0) / 2.
    const BoundingBox gc2 = box(5, 5, 9, 9, 2, 1.0);
    CHECK(mean_average_precision({{box(0, 0, 10, 10, 1, 0.9)}, {}}, {{g1}, {gc2}}, 0.5) ==
          doctest::Approx(0.5).epsilon(1e-12));
    // No gt at all: zero.
    CHECK(mean_average_precision({{box(0, 0, 1, 1, 1, 0.5)}}, {{}}, 0.5) == 0.0);
}

TEST_CASE("comparison protocol: full grid, hash-identical inputs, self-comparison deltas zero") {
    testutil::TempDir tmp("compare");
    const auto data_dir = tmp.path() / "data";
    scenegen::GeneratorParams p;
    p.width = 64;
    p.height = 64;
    for (int i = 0; i < 2; ++i) {
        Sample s = scenegen::render(scenegen::sample_scene(static_cast<std::uint64_t>(i) + 3, p));
        s.sparse_depth = degrade::sparsify(s.dense_depth, 0.02, static_cast<std::uint64_t>(i));
        dataio::write_sample(s, data_dir / ("s" + std::to_string(i)));
    }

    ModelConfig sc = tiny_config(false);
    Model single(sc);
    single.init_params(10);
    dataio::save_checkpoint(single.export_state(), sc, 0, tmp.path() / "single");

    ModelConfig mc = tiny_config(true);
    Model multi(mc);
    multi.init_params(11);
    dataio::save_checkpoint(multi.export_state(), mc, 0, tmp.path() / "multi");

    ComparisonOptions opts;
    opts.noise_levels = {0.0, 0.1, 0.2, 0.4};
    opts.with_mask_modes = true;
    opts.seed = 5;

    SUBCASE("8-cell grid with byte-identical degraded inputs") {
        const ComparisonReport rep =
            run_comparison(tmp.path() / "single", tmp.path() / "multi", data_dir, opts);
        CHECK(rep.cells.size() == 8);
        for (const auto& c : rep.cells) {
            CHECK(c.input_hash_single == c.input_hash_multi);
            CHECK(std::isfinite(c.single.rmse));
            CHECK(std::isfinite(c.multi.rmse));
            if (c.masks_on) {
                CHECK(c.single_masked_region.has_value());
                CHECK(c.multi_masked_region.has_value());
            }
        }
        // clean cell exists with noise 0 and masks off
        CHECK(rep.cells.front().noise_level == 0.0);
        CHECK(!rep.cells.front().masks_on);

        testutil::TempDir out("compare_out");
        write_comparison(rep, out.path());
        CHECK(std::filesystem::exists(out.path() / "report.csv"));
        CHECK(std::filesystem::exists(out.path() / "report.json"));
        CHECK(std::filesystem::exists(out.path() / "rmse_vs_noise.png"));
    }

    SUBCASE("self-comparison gives exactly zero deltas") {
        opts.noise_levels = {0.0, 0.2};
        const ComparisonReport rep =
            run_comparison(tmp.path() / "single", tmp.path() / "single", data_dir, opts);
        CHECK(rep.cells.size() == 4);
        for (const auto& c : rep.cells) {
            CHECK(c.multi.rmse == c.single.rmse);
            CHECK(c.multi.mae == c.single.mae);
            CHECK(c.multi.delta1 == c.single.delta1);
        }
    }
}

TEST_CASE("uncertainty comparison reports one row per model") {
    testutil::TempDir tmp("ucmp");
    const auto data_dir = tmp.path() / "data";
    scenegen::GeneratorParams p;
    p.width = 64;
    p.height = 64;
    p.min_structures = 1;
    Sample s = scenegen::render(scenegen::sample_scene(8, p));
    s.sparse_depth = degrade::sparsify(s.dense_depth, 0.02, 8);
    dataio::write_sample(s, data_dir / "s0");

    SUBCASE("dropout models give defined ratios when boxes exist") {
        ModelConfig sc = tiny_config(false);
        Model single(sc);
        single.init_params(1);
        dataio::save_checkpoint(single.export_state(), sc, 0, tmp.path() / "single");
        ModelConfig mc = tiny_config(true);
        Model multi(mc);
        multi.init_params(2);
        dataio::save_checkpoint(multi.export_state(), mc, 0, tmp.path() / "multi");

        const auto rows = run_uncertainty_comparison(tmp.path() / "single", tmp.path() / "multi",
                                                     data_dir, 4, 77, tmp.path() / "out");
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].model == "single");
        CHECK(rows[1].model == "multi");
        if (!s.boxes.empty()) {
            CHECK(rows[0].ratio_defined);
            CHECK(rows[0].inside_mean >= 0.0);
        }
        CHECK(std::filesystem::exists(tmp.path() / "out" / "variance_single_s0.png"));
    }

    SUBCASE("dropout rate zero reports undefined ratios") {
        ModelConfig nc = tiny_config(false);
        nc.dropout_rate = 0.0;
        Model m(nc);
        m.init_params(3);
        dataio::save_checkpoint(m.export_state(), nc, 0, tmp.path() / "p0");
        const auto rows =
            run_uncertainty_comparison(tmp.path() / "p0", tmp.path() / "p0", data_dir, 3, 5, {});
        REQUIRE(rows.size() == 2);
        for (const auto& r : rows) {
            CHECK(!r.ratio_defined);
            CHECK(r.inside_mean == 0.0);
            CHECK(r.outside_mean == 0.0);
        }
    }
}
