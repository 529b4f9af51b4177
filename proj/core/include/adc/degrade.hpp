#pragma once

#include <cstdint>
#include <vector>

#include "adc/box.hpp"
#include "adc/image.hpp"

namespace adc::degrade {

/// One input-degradation recipe: sparsification density, distance-dependent
/// noise level (sigma = level * depth), and missing-value rectangles (given
/// explicitly and/or drawn at random).
struct CorruptionSpec {
    double density = 0.007;
    double noise_level = 0.0;  // one of {0, 0.1, 0.2, 0.4} in the robustness protocol
    std::vector<BoundingBox> mask_rects;
    int random_mask_count = 0;
    double random_mask_min_side = 20;
    double random_mask_max_side = 60;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Keeps exactly round(density * W * H) pixels of a fully valid map, chosen
/// uniformly without replacement (seeded partial shuffle); kept values are
/// bit-identical to the source. Throws if the count would be zero or the
/// input has invalid pixels.
SparseDepthMap sparsify(const DepthMap& dense, double density, std::uint64_t seed);

/// Replaces each valid pixel d by max(d + level*d*n, 0.001) with n a
/// standard normal draw. Draws depend only on (seed, valid-pixel order), so
/// different levels under one seed share the same underlying noise.
/// level == 0 returns the input unchanged.
SparseDepthMap add_distance_noise(const SparseDepthMap& sparse, double level, std::uint64_t seed);

/// Invalidates (zeroes) every pixel whose center falls inside any box.
/// Boxes must lie inside the image.
SparseDepthMap mask_boxes(const SparseDepthMap& sparse, const BoxList& boxes);

/// k random axis-aligned rectangles with sides in [min_side, max_side],
/// fully inside a w x h image.
BoxList random_mask_boxes(int w, int h, int k, double min_side, double max_side,
                          std::uint64_t seed);

/// sparsify -> add_distance_noise -> mask (explicit rects, then
/// random_mask_count drawn from seed+1).
SparseDepthMap apply(const DepthMap& dense, const CorruptionSpec& spec);

}  // namespace adc::degrade
