#include "adc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "adc/dataio.hpp"
#include "adc/degrade.hpp"
#include "adc/detgeom.hpp"
#include "adc/error.hpp"
#include "adc/hash.hpp"
#include "adc/model.hpp"
#include "adc/uncertainty.hpp"
#include "adc/viz.hpp"

namespace adc::harness {

namespace fs = std::filesystem;
using nlohmann::json;

DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt,
                           const std::vector<std::uint8_t>* region_mask) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw ValidationError("depth_metrics: shape mismatch");
    if (region_mask != nullptr && region_mask->size() != gt.values.size())
        throw ValidationError("depth_metrics: region mask size mismatch");

    DepthMetrics m;
    double se = 0.0, ae = 0.0, rel = 0.0;
    std::size_t d1 = 0, d2 = 0, d3 = 0;
    for (std::size_t i = 0; i < gt.values.size(); ++i) {
        if (gt.values[i] <= 0.0f) continue;
        if (region_mask != nullptr && (*region_mask)[i] == 0) continue;
        const double g = gt.values[i];
        const double p = pred.values[i];
        const double e = p - g;
        se += e * e;
        ae += std::abs(e);
        rel += std::abs(e) / g;
        const double ratio = p > 0.0 ? std::max(p / g, g / p) : std::numeric_limits<double>::infinity();
        if (ratio < 1.25) ++d1;
        if (ratio < 1.25 * 1.25) ++d2;
        if (ratio < 1.25 * 1.25 * 1.25) ++d3;
        ++m.n_pixels;
    }
    if (m.n_pixels == 0) throw ValidationError("depth_metrics: empty evaluation region");
    const double n = static_cast<double>(m.n_pixels);
    m.rmse = std::sqrt(se / n);
    m.mae = ae / n;
    m.rel = rel / n;
    m.delta1 = d1 / n;
    m.delta2 = d2 / n;
    m.delta3 = d3 / n;
    return m;
}

double mean_average_precision(const std::vector<BoxList>& dets, const std::vector<BoxList>& gts,
                              double iou_thr) {
    if (dets.size() != gts.size())
        throw ValidationError("mean_average_precision: per-image list sizes differ");

    std::vector<int> classes;
    for (const auto& gl : gts)
        for (const auto& g : gl)
            if (std::find(classes.begin(), classes.end(), g.class_id) == classes.end())
                classes.push_back(g.class_id);
    if (classes.empty()) return 0.0;
    std::sort(classes.begin(), classes.end());

    double ap_sum = 0.0;
    for (int cls : classes) {
        struct Ranked {
            std::size_t image;
            BoundingBox box;
        };
        std::vector<Ranked> ranked;
        std::size_t npos = 0;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            for (const auto& d : dets[i])
                if (d.class_id == cls) ranked.push_back({i, d});
            for (const auto& g : gts[i])
                if (g.class_id == cls) ++npos;
        }
        if (npos == 0) continue;
        std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
            return detgeom::nms_before(a.box, b.box);
        });

        std::vector<std::vector<bool>> used(gts.size());
        for (std::size_t i = 0; i < gts.size(); ++i) used[i].assign(gts[i].size(), false);

        std::vector<int> tp(ranked.size(), 0);
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            const auto& det = ranked[r];
            double best = iou_thr;
            int best_g = -1;
            for (std::size_t g = 0; g < gts[det.image].size(); ++g) {
                if (gts[det.image][g].class_id != cls || used[det.image][g]) continue;
                const double v = detgeom::iou(det.box, gts[det.image][g]);
                if (v >= best) {
                    best = v;
                    best_g = static_cast<int>(g);
                }
            }
            if (best_g >= 0) {
                used[det.image][static_cast<std::size_t>(best_g)] = true;
                tp[r] = 1;
            }
        }
        std::vector<double> precision(ranked.size()), recall(ranked.size());
        int cum = 0;
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            cum += tp[r];
            precision[r] = static_cast<double>(cum) / static_cast<double>(r + 1);
            recall[r] = static_cast<double>(cum) / static_cast<double>(npos);
        }
        for (int r = static_cast<int>(precision.size()) - 2; r >= 0; --r)
            precision[static_cast<std::size_t>(r)] =
                std::max(precision[static_cast<std::size_t>(r)], precision[static_cast<std::size_t>(r) + 1]);
        double ap = 0.0, prev = 0.0;
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            if (recall[r] > prev) {
                ap += (recall[r] - prev) * precision[r];
                prev = recall[r];
            }
        }
        ap_sum += ap;
    }
    return ap_sum / static_cast<double>(classes.size());
}

namespace {

struct LoadedModel {
    std::unique_ptr<Model> model;
    std::string config_hash;
};

LoadedModel load_model(const fs::path& ckpt) {
    auto loaded = dataio::load_checkpoint(ckpt);
    LoadedModel lm;
    lm.model = std::make_unique<Model>(loaded.config);
    lm.model->import_state(loaded.state);
    lm.config_hash = loaded.config.config_hash();
    return lm;
}

BoxList mask_rects_for(const Sample& s, const ComparisonOptions& opts, std::uint64_t seed) {
    if (opts.placement == MaskPlacement::OverStructures && !s.boxes.empty()) {
        // Largest structures first, mirroring the missing-box protocol's
        // focus on annotated objects.
        BoxList sorted = s.boxes;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const BoundingBox& a, const BoundingBox& b) { return a.area() > b.area(); });
        if (sorted.size() > static_cast<std::size_t>(opts.masks_per_sample))
            sorted.resize(static_cast<std::size_t>(opts.masks_per_sample));
        return sorted;
    }
    return degrade::random_mask_boxes(s.sparse_depth.width, s.sparse_depth.height,
                                      opts.masks_per_sample, opts.random_mask_min_side,
                                      opts.random_mask_max_side, seed);
}

std::vector<std::uint8_t> region_from_boxes(const BoxList& boxes, int w, int h) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
    for (const auto& b : boxes)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (b.contains_pixel(x, y)) mask[static_cast<std::size_t>(y) * w + x] = 1;
    return mask;
}

struct MetricAccum {
    DepthMetrics sum;
    std::size_t count = 0;

    void add(const DepthMetrics& m) {
        sum.rmse += m.rmse;
        sum.mae += m.mae;
        sum.rel += m.rel;
        sum.delta1 += m.delta1;
        sum.delta2 += m.delta2;
        sum.delta3 += m.delta3;
        sum.n_pixels += m.n_pixels;
        ++count;
    }
    DepthMetrics mean() const {
        DepthMetrics m = sum;
        if (count > 0) {
            const double c = static_cast<double>(count);
            m.rmse /= c;
            m.mae /= c;
            m.rel /= c;
            m.delta1 /= c;
            m.delta2 /= c;
            m.delta3 /= c;
        }
        return m;
    }
};

}  // namespace

ComparisonReport run_comparison(const fs::path& single_ckpt, const fs::path& multi_ckpt,
                                const fs::path& data_dir, const ComparisonOptions& opts) {
    LoadedModel single = load_model(single_ckpt);
    LoadedModel multi = load_model(multi_ckpt);
    if (single.model->config().input_width != multi.model->config().input_width ||
        single.model->config().input_height != multi.model->config().input_height)
        throw ValidationError("run_comparison: checkpoints disagree on input size");

    auto dirs = dataio::list_sample_dirs(data_dir);
    if (dirs.empty()) throw ValidationError("run_comparison: no samples under " + data_dir.string());
    if (opts.max_samples > 0 && dirs.size() > static_cast<std::size_t>(opts.max_samples))
        dirs.resize(static_cast<std::size_t>(opts.max_samples));
    std::vector<Sample> samples;
    samples.reserve(dirs.size());
    for (const auto& d : dirs) samples.push_back(dataio::read_sample(d));

    ComparisonReport report;
    report.single_checkpoint = single_ckpt.string();
    report.multi_checkpoint = multi_ckpt.string();
    report.single_config_hash = single.config_hash;
    report.multi_config_hash = multi.config_hash;
    report.n_samples = static_cast<int>(samples.size());

    std::vector<bool> mask_modes{false};
    if (opts.with_mask_modes) mask_modes.push_back(true);

    int cell_idx = 0;
    for (double noise : opts.noise_levels) {
        for (bool masks_on : mask_modes) {
            CellReport cell;
            cell.noise_level = noise;
            cell.masks_on = masks_on;

            MetricAccum acc_single, acc_multi, acc_single_masked, acc_multi_masked;
            std::vector<BoxList> multi_dets, gt_boxes;

            for (int model_idx = 0; model_idx < 2; ++model_idx) {
                Model& model = model_idx == 0 ? *single.model : *multi.model;
                Fnv1a64 input_hash;
                for (std::size_t si = 0; si < samples.size(); ++si) {
                    const Sample& s = samples[si];
                    // Degradation depends only on (seed, cell, sample):
                    // byte-identical inputs for both models.
                    Fnv1a64 seed_hash;
                    seed_hash.update_pod(opts.seed);
                    seed_hash.update_pod(cell_idx);
                    seed_hash.update_pod(si);
                    const std::uint64_t cell_seed = seed_hash.digest();

                    SparseDepthMap degraded = s.sparse_depth;
                    if (noise > 0.0) degraded = degrade::add_distance_noise(degraded, noise, cell_seed);
                    BoxList rects;
                    if (masks_on) {
                        rects = mask_rects_for(s, opts, cell_seed + 17);
                        if (!rects.empty()) degraded = degrade::mask_boxes(degraded, rects);
                    }
                    input_hash.update(degraded.values.data(),
                                      degraded.values.size() * sizeof(float));

                    Model::Prediction pred = model.predict(s.rgb, degraded);
                    const DepthMetrics m = depth_metrics(pred.depth, s.dense_depth);
                    (model_idx == 0 ? acc_single : acc_multi).add(m);
                    if (masks_on && !rects.empty()) {
                        const auto region =
                            region_from_boxes(rects, s.dense_depth.width, s.dense_depth.height);
                        const DepthMetrics mm = depth_metrics(pred.depth, s.dense_depth, &region);
                        (model_idx == 0 ? acc_single_masked : acc_multi_masked).add(mm);
                    }
                    if (model_idx == 1) {
                        multi_dets.push_back(pred.detections);
                        gt_boxes.push_back(s.boxes);
                    }
                }
                (model_idx == 0 ? cell.input_hash_single : cell.input_hash_multi) = input_hash.hex();
            }

            if (cell.input_hash_single != cell.input_hash_multi)
                throw ValidationError("run_comparison: degraded inputs differ between model runs");

            cell.single = acc_single.mean();
            cell.multi = acc_multi.mean();
            if (acc_single_masked.count > 0) cell.single_masked_region = acc_single_masked.mean();
            if (acc_multi_masked.count > 0) cell.multi_masked_region = acc_multi_masked.mean();
            cell.multi_map50 = mean_average_precision(multi_dets, gt_boxes, 0.5);
            report.cells.push_back(cell);
            ++cell_idx;
        }
    }

    if (opts.mc_passes > 0)
        report.uncertainty = run_uncertainty_comparison(single_ckpt, multi_ckpt, data_dir,
                                                        opts.mc_passes, opts.mc_seed, {});
    return report;
}

std::vector<UncertaintyRow> run_uncertainty_comparison(const fs::path& single_ckpt,
                                                       const fs::path& multi_ckpt,
                                                       const fs::path& data_dir, int n_passes,
                                                       std::uint64_t seed,
                                                       const fs::path& out_dir) {
    if (n_passes < 1)
        throw ValidationError("run_uncertainty_comparison: n_passes must be >= 1");
    auto dirs = dataio::list_sample_dirs(data_dir);
    if (dirs.empty())
        throw ValidationError("run_uncertainty_comparison: no samples under " + data_dir.string());

    std::vector<UncertaintyRow> rows;
    for (int model_idx = 0; model_idx < 2; ++model_idx) {
        LoadedModel lm = load_model(model_idx == 0 ? single_ckpt : multi_ckpt);
        UncertaintyRow row;
        row.model = model_idx == 0 ? "single" : "multi";

        double sum_in = 0.0, sum_out = 0.0;
        std::size_t n_in = 0, n_out = 0;
        int emitted = 0;
        for (std::size_t si = 0; si < dirs.size(); ++si) {
            const Sample s = dataio::read_sample(dirs[si]);
            const auto umap = uncertainty::mc_dropout_predict(*lm.model, s.rgb, s.sparse_depth,
                                                              n_passes, seed + 1000 * si);
            if (!s.boxes.empty()) {
                const auto rv = uncertainty::summarize_uncertainty(umap, s.boxes);
                sum_in += rv.inside_mean * static_cast<double>(rv.inside_pixels);
                n_in += rv.inside_pixels;
                sum_out += rv.outside_mean * static_cast<double>(rv.outside_pixels);
                n_out += rv.outside_pixels;
            } else {
                for (float v : umap.variance) sum_out += v;
                n_out += umap.variance.size();
            }
            if (!out_dir.empty() && emitted < 4) {
                const ImageRgb8 vz = viz::false_color(umap.variance, umap.width, umap.height);
                dataio::write_png(vz, out_dir / ("variance_" + row.model + "_" +
                                                 dirs[si].filename().string() + ".png"));
                ++emitted;
            }
        }
        row.inside_mean = n_in > 0 ? sum_in / static_cast<double>(n_in) : 0.0;
        row.outside_mean = n_out > 0 ? sum_out / static_cast<double>(n_out) : 0.0;
        row.ratio_defined = row.outside_mean > 0.0 && n_in > 0;
        row.ratio = row.ratio_defined ? row.inside_mean / row.outside_mean : 0.0;
        rows.push_back(row);
    }
    return rows;
}

namespace {

json metrics_to_json(const DepthMetrics& m) {
    return json{{"rmse", m.rmse},   {"mae", m.mae},       {"rel", m.rel},
                {"delta1", m.delta1}, {"delta2", m.delta2}, {"delta3", m.delta3},
                {"n_pixels", m.n_pixels}};
}

}  // namespace

void write_comparison(const ComparisonReport& report, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("write_comparison: cannot create " + out_dir.string());

    {
        std::ofstream os(out_dir / "report.csv");
        if (!os) throw IoError("write_comparison: cannot open report.csv");
        os << "noise_level,masks_on,single_rmse,multi_rmse,delta_rmse,single_mae,multi_mae,"
              "single_rel,multi_rel,single_delta1,multi_delta1,"
              "single_masked_rmse,multi_masked_rmse,delta_masked_rmse,multi_map50,input_hash\n";
        os.precision(8);
        for (const auto& c : report.cells) {
            os << c.noise_level << ',' << (c.masks_on ? 1 : 0) << ',' << c.single.rmse << ','
               << c.multi.rmse << ',' << (c.multi.rmse - c.single.rmse) << ',' << c.single.mae << ','
               << c.multi.mae << ',' << c.single.rel << ',' << c.multi.rel << ',' << c.single.delta1
               << ',' << c.multi.delta1 << ',';
            if (c.single_masked_region && c.multi_masked_region)
                os << c.single_masked_region->rmse << ',' << c.multi_masked_region->rmse << ','
                   << (c.multi_masked_region->rmse - c.single_masked_region->rmse) << ',';
            else
                os << ",,,";
            os << c.multi_map50 << ',' << c.input_hash_single << '\n';
        }
    }

    {
        json j;
        j["single_checkpoint"] = report.single_checkpoint;
        j["multi_checkpoint"] = report.multi_checkpoint;
        j["single_config_hash"] = report.single_config_hash;
        j["multi_config_hash"] = report.multi_config_hash;
        j["n_samples"] = report.n_samples;
        j["cells"] = json::array();
        for (const auto& c : report.cells) {
            json jc{{"noise_level", c.noise_level},
                    {"masks_on", c.masks_on},
                    {"single", metrics_to_json(c.single)},
                    {"multi", metrics_to_json(c.multi)},
                    {"delta_rmse", c.multi.rmse - c.single.rmse},
                    {"multi_map50", c.multi_map50},
                    {"input_hash", c.input_hash_single}};
            if (c.single_masked_region) jc["single_masked_region"] = metrics_to_json(*c.single_masked_region);
            if (c.multi_masked_region) {
                jc["multi_masked_region"] = metrics_to_json(*c.multi_masked_region);
                jc["delta_masked_rmse"] =
                    c.multi_masked_region->rmse - c.single_masked_region->rmse;
            }
            j["cells"].push_back(jc);
        }
        if (!report.uncertainty.empty()) {
            j["uncertainty"] = json::array();
            for (const auto& u : report.uncertainty)
                j["uncertainty"].push_back(json{{"model", u.model},
                                                {"inside_mean", u.inside_mean},
                                                {"outside_mean", u.outside_mean},
                                                {"ratio", u.ratio_defined ? json(u.ratio) : json()}});
        }
        std::ofstream os(out_dir / "report.json");
        if (!os) throw IoError("write_comparison: cannot open report.json");
        os << j.dump(2) << '\n';
    }

    // RMSE vs noise, one series per (model, mask mode).
    std::vector<viz::Series> series;
    for (int masked = 0; masked < 2; ++masked) {
        viz::Series s_single{masked ? "single, masks" : "single", {}, {}};
        viz::Series s_multi{masked ? "multi, masks" : "multi", {}, {}};
        for (const auto& c : report.cells) {
            if (c.masks_on != static_cast<bool>(masked)) continue;
            s_single.x.push_back(c.noise_level);
            s_single.y.push_back(c.single.rmse);
            s_multi.x.push_back(c.noise_level);
            s_multi.y.push_back(c.multi.rmse);
        }
        if (!s_single.x.empty()) {
            series.push_back(std::move(s_single));
            series.push_back(std::move(s_multi));
        }
    }
    if (!series.empty()) {
        const ImageRgb8 plot =
            viz::line_plot(series, "Depth RMSE vs input noise", "noise level", "RMSE [m]");
        dataio::write_png(plot, out_dir / "rmse_vs_noise.png");
    }
}

}  // namespace adc::harness
