#include "adc/image.hpp"

#include <cmath>

#include "adc/error.hpp"
#include "adc/sample.hpp"

namespace adc {

void DepthMap::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("DepthMap: non-positive dimensions");
    if (values.size() != static_cast<std::size_t>(width) * height)
        throw ValidationError("DepthMap: value buffer size does not match dimensions");
    for (float v : values) {
        if (!std::isfinite(v) || v < 0.0f)
            throw ValidationError("DepthMap: depth values must be finite and >= 0");
    }
}

bool operator==(const ImageRgb8& a, const ImageRgb8& b) {
    return a.width == b.width && a.height == b.height && a.data == b.data;
}

bool operator==(const DepthMap& a, const DepthMap& b) {
    return a.width == b.width && a.height == b.height && a.values == b.values;
}

void validate_sample(const Sample& s) {
    s.dense_depth.validate();
    s.sparse_depth.validate();
    const int w = s.rgb.width, h = s.rgb.height;
    if (w <= 0 || h <= 0) throw ValidationError("Sample: empty rgb image");
    if (s.rgb.data.size() != static_cast<std::size_t>(w) * h * 3)
        throw ValidationError("Sample: rgb buffer size mismatch");
    if (s.dense_depth.width != w || s.dense_depth.height != h ||
        s.sparse_depth.width != w || s.sparse_depth.height != h)
        throw ValidationError("Sample: rgb, dense_depth and sparse_depth must share H x W");
    if (s.sparse_depth.density <= 0.0 || s.sparse_depth.density > 1.0)
        throw ValidationError("Sample: sparse density must be in (0, 1]");
    for (const auto& b : s.boxes) validate_box_in_image(b, w, h);
    if (s.meta.fx <= 0.0 || s.meta.fy <= 0.0)
        throw ValidationError("Sample: focal lengths must be positive");
}

}  // namespace adc
