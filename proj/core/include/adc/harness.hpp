#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adc/box.hpp"
#include "adc/image.hpp"

namespace adc::harness {

struct DepthMetrics {
    double rmse = 0.0;
    double mae = 0.0;
    double rel = 0.0;     // mean |err| / gt
    double delta1 = 0.0;  // fraction with max(pred/gt, gt/pred) < 1.25
    double delta2 = 0.0;  // ... < 1.25^2
    double delta3 = 0.0;  // ... < 1.25^3
    std::size_t n_pixels = 0;
};

/// Metrics over gt-valid pixels, optionally restricted by a row-major
/// region mask (non-zero = evaluate). Throws ValidationError on shape
/// mismatch or an empty evaluation region.
DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt,
                           const std::vector<std::uint8_t>* region_mask = nullptr);

/// Cross-image mAP at one IoU threshold: per-class all-point AP over
/// globally ranked detections, averaged over classes present in gt.
double mean_average_precision(const std::vector<BoxList>& dets, const std::vector<BoxList>& gts,
                              double iou_thr = 0.5);

enum class MaskPlacement { OverStructures, Random };

struct ComparisonOptions {
    std::vector<double> noise_levels{0.0, 0.1, 0.2, 0.4};
    bool with_mask_modes = true;  // grid = noise x {masks off, masks on}
    MaskPlacement placement = MaskPlacement::OverStructures;
    int masks_per_sample = 2;
    double random_mask_min_side = 30, random_mask_max_side = 70;
    std::uint64_t seed = 0;
    int max_samples = 0;  // 0 = all
    int mc_passes = 0;    // >0 appends the uncertainty comparison
    std::uint64_t mc_seed = 1234;
};

struct CellReport {
    double noise_level = 0.0;
    bool masks_on = false;
    DepthMetrics single, multi;
    std::optional<DepthMetrics> single_masked_region, multi_masked_region;
    double multi_map50 = 0.0;
    std::string input_hash_single, input_hash_multi;  // must match
};

struct UncertaintyRow {
    std::string model;
    double inside_mean = 0.0, outside_mean = 0.0;
    bool ratio_defined = false;
    double ratio = 0.0;
};

struct ComparisonReport {
    std::vector<CellReport> cells;
    std::vector<UncertaintyRow> uncertainty;  // empty unless mc_passes > 0
    std::string single_checkpoint, multi_checkpoint;
    std::string single_config_hash, multi_config_hash;
    int n_samples = 0;
};

/// The robustness protocol: evaluates both checkpoints on identically
/// degraded inputs over the (noise x masks) grid. Degradation depends only
/// on (options.seed, cell, sample), so both models see byte-identical
/// inputs; the per-cell hashes record (and enforce) that.
ComparisonReport run_comparison(const std::filesystem::path& single_ckpt,
                                const std::filesystem::path& multi_ckpt,
                                const std::filesystem::path& data_dir,
                                const ComparisonOptions& opts = {});

/// MC-dropout uncertainty summaries (inside vs outside gt boxes) for both
/// checkpoints; also emits false-color variance maps for the first few
/// samples when out_dir is non-empty.
std::vector<UncertaintyRow> run_uncertainty_comparison(
    const std::filesystem::path& single_ckpt, const std::filesystem::path& multi_ckpt,
    const std::filesystem::path& data_dir, int n_passes, std::uint64_t seed,
    const std::filesystem::path& out_dir = {});

/// report.csv, report.json and the RMSE-vs-noise plot under out_dir.
void write_comparison(const ComparisonReport& report, const std::filesystem::path& out_dir);

}  // namespace adc::harness
