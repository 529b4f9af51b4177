#pragma once

#include <cstdint>
#include <string>

#include "adc/box.hpp"
#include "adc/image.hpp"

namespace adc {

/// Camera intrinsics plus provenance for one record. `provenance` is a JSON
/// text blob describing how the record was produced (generator parameters,
/// corruption chain); it is stored canonically (compact, sorted keys).
struct SceneMeta {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    std::uint64_t seed = 0;
    std::string provenance;  // canonical JSON object text, may be empty
};

/// One training/evaluation record.
struct Sample {
    ImageRgb8 rgb;
    DepthMap dense_depth;
    SparseDepthMap sparse_depth;
    BoxList boxes;
    SceneMeta meta;
};

/// Enforces the Sample invariants: rgb/dense/sparse share one H x W, boxes
/// lie inside the image, intrinsics positive, depth rasters well formed.
void validate_sample(const Sample& s);

}  // namespace adc
