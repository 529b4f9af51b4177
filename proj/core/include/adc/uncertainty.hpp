#pragma once

#include <cstdint>
#include <vector>

#include "adc/box.hpp"
#include "adc/image.hpp"
#include "adc/model.hpp"

namespace adc::uncertainty {

/// Per-pixel predictive mean and population (maximum-likelihood) variance
/// of the depth output over MC-dropout passes.
struct UncertaintyMap {
    int width = 0, height = 0;
    std::vector<float> mean;
    std::vector<float> variance;  // meters^2, >= 0 everywhere
    int n_passes = 0;
};

/// Per-pixel Gaussian fit over forward passes: sample mean and population
/// variance (the n-denominator MLE). Identical passes give exactly zero
/// variance.
UncertaintyMap fit_gaussian(const std::vector<DepthMap>& passes);

/// Runs n_passes depth forwards with dropout active; pass i uses rng seed
/// (seed + i). Bit-reproducible given (state, inputs, seed, n_passes); with
/// dropout rate 0 the variance is identically zero.
UncertaintyMap mc_dropout_predict(Model& model, const ImageRgb8& rgb,
                                  const SparseDepthMap& sparse, int n_passes,
                                  std::uint64_t seed);

struct RegionVariance {
    double inside_mean = 0.0;   // mean variance over pixels inside any box
    double outside_mean = 0.0;  // mean variance over the complement
    double ratio = 0.0;         // inside / outside, when defined
    bool ratio_defined = false;
    std::size_t inside_pixels = 0, outside_pixels = 0;
};

/// Region-averaged variances w.r.t. a set of (ground-truth) boxes. Throws
/// ValidationError when either region is empty (no boxes, or boxes covering
/// the full image).
RegionVariance summarize_uncertainty(const UncertaintyMap& umap, const BoxList& boxes);

}  // namespace adc::uncertainty
