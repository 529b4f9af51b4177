#include <doctest.h>

#include <fstream>

#include "adc/dataio.hpp"
#include "adc/degrade.hpp"
#include "adc/error.hpp"
#include "adc/scenegen.hpp"
#include "adc/trainer.hpp"
#include "test_util.hpp"

using namespace adc;
using namespace adc::trainer;

namespace {

ModelConfig tiny_config() {
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
    cfg.dropout_rate = 0.0;  // keep the tiny overfit fast and clean
    cfg.det.roi_head_dim = 32;
    cfg.det.rpn_pre_nms_topk = 128;
    cfg.det.rpn_post_nms_train = 32;
    cfg.det.rpn_post_nms_infer = 32;
    cfg.det.rpn_batch = 32;
    cfg.det.roi_batch = 16;
    return cfg;
}

std::vector<Sample> tiny_dataset(int n, std::uint64_t seed0) {
    scenegen::GeneratorParams p;
    p.width = 64;
    p.height = 64;
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) {
        Sample s = scenegen::render(scenegen::sample_scene(seed0 + static_cast<std::uint64_t>(i), p));
        s.sparse_depth = degrade::sparsify(s.dense_depth, 0.02, seed0 + static_cast<std::uint64_t>(i));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("learning-rate schedule halves every period") {
    TrainConfig cfg;
    CHECK(lr_at(0, cfg) == 1e-4);
    CHECK(lr_at(4, cfg) == 1e-4);
    CHECK(lr_at(5, cfg) == 5e-5);
    CHECK(lr_at(12, cfg) == 2.5e-5);
    double prev = lr_at(0, cfg);
    for (int e = 1; e < 40; ++e) {
        CHECK(lr_at(e, cfg) <= prev);
        prev = lr_at(e, cfg);
    }
    CHECK_THROWS_AS(lr_at(-1, cfg), ValidationError);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.base_lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.weights.w_detection = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("single-task training reduces the consistency loss on a tiny set") {
    ModelConfig mc = tiny_config();
    mc.multitask = false;
    Model model(mc);
    model.init_params(100);
    const auto samples = tiny_dataset(4, 500);

    TrainConfig cfg;
    cfg.epochs = 12;  // 48 steps
    cfg.multitask = false;
    cfg.seed = 1;
    cfg.checkpoint_every = 0;
    const TrainResult res = train_model(model, samples, cfg, {});
    REQUIRE(res.metrics.size() == 12);
    for (const auto& m : res.metrics) {
        CHECK(std::isfinite(m.total));
        CHECK(m.consistency >= 0.0);
        CHECK(m.smoothness >= 0.0);
    }
    CHECK(res.metrics.back().consistency < res.metrics.front().consistency);
}

TEST_CASE("training is deterministic given the seed") {
    const auto samples = tiny_dataset(3, 900);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.multitask = true;
    cfg.seed = 7;
    cfg.checkpoint_every = 0;

    ModelConfig mc = tiny_config();
    Model a(mc), b(mc);
    a.init_params(55);
    b.init_params(55);
    const TrainResult ra = train_model(a, samples, cfg, {});
    const TrainResult rb = train_model(b, samples, cfg, {});
    REQUIRE(ra.metrics.size() == rb.metrics.size());
    for (std::size_t i = 0; i < ra.metrics.size(); ++i) {
        CHECK(ra.metrics[i].consistency == rb.metrics[i].consistency);
        CHECK(ra.metrics[i].smoothness == rb.metrics[i].smoothness);
        CHECK(ra.metrics[i].detection == rb.metrics[i].detection);
        CHECK(ra.metrics[i].total == rb.metrics[i].total);
    }
    const NetworkState sa = a.export_state(), sb = b.export_state();
    for (std::size_t i = 0; i < sa.params.size(); ++i) CHECK(sa.params[i].values == sb.params[i].values);
}

TEST_CASE("multitask off leaves detection parameters bitwise untouched") {
    ModelConfig mc = tiny_config();  // detection head present
    Model model(mc);
    model.init_params(42);
    const NetworkState before = model.export_state();

    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.multitask = false;  // no detection supervision
    cfg.seed = 3;
    cfg.checkpoint_every = 0;
    train_model(model, tiny_dataset(2, 77), cfg, {});

    const NetworkState after = model.export_state();
    bool any_shared_changed = false;
    for (std::size_t i = 0; i < before.params.size(); ++i) {
        const auto& name = before.params[i].name;
        const bool is_det = name.rfind("fpn.", 0) == 0 || name.rfind("rpn.", 0) == 0 ||
                            name.rfind("roi.", 0) == 0;
        if (is_det)
            CHECK(after.params[i].values == before.params[i].values);
        else if (after.params[i].values != before.params[i].values)
            any_shared_changed = true;
    }
    CHECK(any_shared_changed);
}

TEST_CASE("one multitask step with gt boxes updates encoder parameters") {
    ModelConfig mc = tiny_config();
    Model model(mc);
    model.init_params(8);
    auto samples = tiny_dataset(6, 1234);
    samples.erase(std::remove_if(samples.begin(), samples.end(),
                                 [](const Sample& s) { return s.boxes.empty(); }),
                  samples.end());
    REQUIRE(!samples.empty());
    samples.resize(1);

    const NetworkState before = model.export_state();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.multitask = true;
    cfg.checkpoint_every = 0;
    train_model(model, samples, cfg, {});
    const NetworkState after = model.export_state();
    bool encoder_changed = false;
    for (std::size_t i = 0; i < before.params.size(); ++i)
        if (before.params[i].name.rfind("encoder.", 0) == 0 &&
            after.params[i].values != before.params[i].values)
            encoder_changed = true;
    CHECK(encoder_changed);
}

TEST_CASE("embedding single-task weights into a multi-task state") {
    ModelConfig mc = tiny_config();
    ModelConfig sc = mc;
    sc.multitask = false;

    Model single(sc);
    single.init_params(31);
    Model multi(mc);
    multi.init_params(32);

    const NetworkState emb = embed_single_into_multi(single.export_state(), multi.export_state());
    // shared keys bitwise equal to the single state
    for (const auto& p : single.export_state().params) {
        const auto* e = emb.find(p.name);
        REQUIRE(e != nullptr);
        CHECK(e->values == p.values);
    }
    multi.import_state(emb);

    const auto samples = tiny_dataset(1, 3000);
    const auto ps = single.predict(samples[0].rgb, samples[0].sparse_depth);
    const auto pm = multi.predict(samples[0].rgb, samples[0].sparse_depth);
    CHECK(ps.depth == pm.depth);

    SUBCASE("mismatched architectures are rejected") {
        ModelConfig other = sc;
        other.decoder_channels = {16, 8, 8, 8, 4};
        Model odd(other);
        odd.init_params(1);
        CHECK_THROWS_AS(embed_single_into_multi(odd.export_state(), multi.export_state()),
                        ValidationError);
    }
}

TEST_CASE("training writes metrics csv and checkpoints") {
    testutil::TempDir tmp("train");
    const auto data_dir = tmp.path() / "data";
    for (int i = 0; i < 2; ++i) {
        scenegen::GeneratorParams p;
        p.width = 64;
        p.height = 64;
        Sample s = scenegen::render(scenegen::sample_scene(static_cast<std::uint64_t>(i), p));
        s.sparse_depth = degrade::sparsify(s.dense_depth, 0.02, static_cast<std::uint64_t>(i));
        dataio::write_sample(s, data_dir / ("s" + std::to_string(i)));
    }

    ModelConfig mc = tiny_config();
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.multitask = false;
    cfg.checkpoint_every = 1;
    cfg.seed = 9;
    const TrainResult res = train(data_dir, cfg, mc, tmp.path() / "run");
    CHECK(std::filesystem::exists(res.final_checkpoint / "params.bin"));
    CHECK(std::filesystem::exists(tmp.path() / "run" / "epoch_001"));
    CHECK(std::filesystem::exists(tmp.path() / "run" / "metrics.csv"));

    std::ifstream csv(tmp.path() / "run" / "metrics.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "epoch,lr,l_consistency,l_smoothness,l_detection,total");
    int rows = 0;
    for (std::string line; std::getline(csv, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 2);

    const auto ck = dataio::load_checkpoint(res.final_checkpoint);
    CHECK(ck.epoch == 2);
    CHECK(ck.config.multitask == false);
}

TEST_CASE("empty dataset is rejected") {
    ModelConfig mc = tiny_config();
    Model model(mc);
    model.init_params(0);
    TrainConfig cfg;
    CHECK_THROWS_AS(train_model(model, {}, cfg, {}), ValidationError);
}
