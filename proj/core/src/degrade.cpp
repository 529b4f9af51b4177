#include "adc/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adc/error.hpp"
#include "adc/rng.hpp"

namespace adc::degrade {

void CorruptionSpec::validate() const {
    if (density <= 0.0 || density > 1.0)
        throw ValidationError("CorruptionSpec: density must be in (0, 1]");
    if (noise_level < 0.0) throw ValidationError("CorruptionSpec: noise_level must be >= 0");
    if (random_mask_count < 0)
        throw ValidationError("CorruptionSpec: random_mask_count must be >= 0");
    if (random_mask_min_side <= 0 || random_mask_max_side < random_mask_min_side)
        throw ValidationError("CorruptionSpec: degenerate random mask size range");
}

SparseDepthMap sparsify(const DepthMap& dense, double density, std::uint64_t seed) {
    dense.validate();
    if (density <= 0.0 || density > 1.0)
        throw ValidationError("sparsify: density must be in (0, 1]");
    const std::size_t n = dense.values.size();
    if (dense.valid_count() != n)
        throw ValidationError("sparsify: input map must be fully valid");
    const auto k = static_cast<std::size_t>(std::llround(density * static_cast<double>(n)));
    if (k == 0) throw ValidationError("sparsify: density keeps zero pixels");

    SparseDepthMap out(dense.width, dense.height, density);
    if (k >= n) {
        out.values = dense.values;
        return out;
    }

    // Partial Fisher-Yates: after k swaps the prefix is a uniform
    // without-replacement sample of the index set.
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    Pcg32 rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.bounded(static_cast<std::uint32_t>(n - i));
        std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < k; ++i) out.values[idx[i]] = dense.values[idx[i]];
    return out;
}

SparseDepthMap add_distance_noise(const SparseDepthMap& sparse, double level,
                                  std::uint64_t seed) {
    if (level < 0.0) throw ValidationError("add_distance_noise: level must be >= 0");
    if (level == 0.0) return sparse;
    SparseDepthMap out = sparse;
    Pcg32 rng(seed);
    for (auto& v : out.values) {
        if (v <= 0.0f) continue;
        const double d = static_cast<double>(v);
        const double noisy = d + level * d * rng.normal();
        v = static_cast<float>(std::max(noisy, 0.001));
    }
    return out;
}

SparseDepthMap mask_boxes(const SparseDepthMap& sparse, const BoxList& boxes) {
    for (const auto& b : boxes) validate_box_in_image(b, sparse.width, sparse.height);
    SparseDepthMap out = sparse;
    for (const auto& b : boxes) {
        const int x0 = std::max(0, static_cast<int>(std::floor(b.x_min - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(b.y_min - 0.5)));
        const int x1 = std::min(sparse.width - 1, static_cast<int>(std::ceil(b.x_max)));
        const int y1 = std::min(sparse.height - 1, static_cast<int>(std::ceil(b.y_max)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (b.contains_pixel(x, y)) out.at(x, y) = 0.0f;
    }
    return out;
}

BoxList random_mask_boxes(int w, int h, int k, double min_side, double max_side,
                          std::uint64_t seed) {
    if (k < 0) throw ValidationError("random_mask_boxes: k must be >= 0");
    if (min_side <= 0 || max_side < min_side)
        throw ValidationError("random_mask_boxes: degenerate size range");
    Pcg32 rng(seed);
    BoxList out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const double bw = std::min(rng.uniform(min_side, max_side), static_cast<double>(w));
        const double bh = std::min(rng.uniform(min_side, max_side), static_cast<double>(h));
        BoundingBox b;
        b.x_min = rng.uniform(0.0, w - bw);
        b.y_min = rng.uniform(0.0, h - bh);
        b.x_max = b.x_min + bw;
        b.y_max = b.y_min + bh;
        out.push_back(b);
    }
    return out;
}

SparseDepthMap apply(const DepthMap& dense, const CorruptionSpec& spec) {
    spec.validate();
    SparseDepthMap s = sparsify(dense, spec.density, spec.seed);
    s = add_distance_noise(s, spec.noise_level, spec.seed);
    BoxList rects = spec.mask_rects;
    if (spec.random_mask_count > 0) {
        BoxList extra = random_mask_boxes(dense.width, dense.height, spec.random_mask_count,
                                          spec.random_mask_min_side, spec.random_mask_max_side,
                                          spec.seed + 1);
        rects.insert(rects.end(), extra.begin(), extra.end());
    }
    if (!rects.empty()) s = mask_boxes(s, rects);
    return s;
}

}  // namespace adc::degrade
