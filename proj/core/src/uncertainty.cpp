#include "adc/uncertainty.hpp"

#include <cmath>

#include "adc/error.hpp"

namespace adc::uncertainty {

UncertaintyMap fit_gaussian(const std::vector<DepthMap>& passes) {
    if (passes.empty()) throw ValidationError("fit_gaussian: needs at least one pass");
    const int n_passes = static_cast<int>(passes.size());
    for (const auto& p : passes)
        if (p.width != passes[0].width || p.height != passes[0].height)
            throw ValidationError("fit_gaussian: pass shapes differ");

    UncertaintyMap out;
    out.width = passes[0].width;
    out.height = passes[0].height;
    out.n_passes = n_passes;
    const std::size_t n_px = passes[0].values.size();
    out.mean.resize(n_px);
    out.variance.resize(n_px);

    // Shifted two-pass statistics: with identical passes (dropout rate 0)
    // all differences are exactly zero, so the variance is exactly zero.
    const double inv_n = 1.0 / n_passes;
    for (std::size_t px = 0; px < n_px; ++px) {
        const double base = passes[0].values[px];
        double sum_d = 0.0;
        for (int i = 1; i < n_passes; ++i)
            sum_d += static_cast<double>(passes[static_cast<std::size_t>(i)].values[px]) - base;
        const double mean_d = sum_d * inv_n;
        double var = mean_d * mean_d;  // first pass difference is zero
        for (int i = 1; i < n_passes; ++i) {
            const double d = (static_cast<double>(passes[static_cast<std::size_t>(i)].values[px]) - base) - mean_d;
            var += d * d;
        }
        out.mean[px] = static_cast<float>(base + mean_d);
        out.variance[px] = static_cast<float>(var * inv_n);
    }
    return out;
}

UncertaintyMap mc_dropout_predict(Model& model, const ImageRgb8& rgb,
                                  const SparseDepthMap& sparse, int n_passes,
                                  std::uint64_t seed) {
    if (n_passes < 1) throw ValidationError("mc_dropout_predict: n_passes must be >= 1");

    std::vector<DepthMap> passes;
    passes.reserve(static_cast<std::size_t>(n_passes));
    for (int i = 0; i < n_passes; ++i) {
        Pcg32 rng(seed + static_cast<std::uint64_t>(i));
        nn::FwdCtx ctx;
        ctx.grad = false;
        ctx.dropout = true;
        ctx.rng = &rng;
        Model::EncoderFeatures f = model.forward_encoder(rgb, sparse, ctx);
        passes.push_back(model.forward_depth(f, ctx));
    }
    return fit_gaussian(passes);
}

RegionVariance summarize_uncertainty(const UncertaintyMap& umap, const BoxList& boxes) {
    for (const auto& b : boxes) validate_box_in_image(b, umap.width, umap.height);

    RegionVariance out;
    double sum_in = 0.0, sum_out = 0.0;
    for (int y = 0; y < umap.height; ++y) {
        for (int x = 0; x < umap.width; ++x) {
            bool inside = false;
            for (const auto& b : boxes)
                if (b.contains_pixel(x, y)) {
                    inside = true;
                    break;
                }
            const double v = umap.variance[static_cast<std::size_t>(y) * umap.width + x];
            if (inside) {
                sum_in += v;
                ++out.inside_pixels;
            } else {
                sum_out += v;
                ++out.outside_pixels;
            }
        }
    }
    if (out.inside_pixels == 0)
        throw ValidationError("summarize_uncertainty: empty inside region (no boxes?)");
    if (out.outside_pixels == 0)
        throw ValidationError("summarize_uncertainty: empty outside region (boxes cover image)");
    out.inside_mean = sum_in / static_cast<double>(out.inside_pixels);
    out.outside_mean = sum_out / static_cast<double>(out.outside_pixels);
    out.ratio_defined = out.outside_mean > 0.0;
    out.ratio = out.ratio_defined ? out.inside_mean / out.outside_mean : 0.0;
    return out;
}

}  // namespace adc::uncertainty
