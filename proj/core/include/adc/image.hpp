#pragma once

#include <cstdint>
#include <vector>

namespace adc {

/// 8-bit RGB raster, row-major, interleaved channels.
struct ImageRgb8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // size = width * height * 3

    ImageRgb8() = default;
    ImageRgb8(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* px(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* px(int x, int y) const {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
};

/// Dense depth raster in meters. A pixel is valid iff its value is strictly
/// positive; invalid pixels store exactly 0. The validity mask is derived,
/// never stored separately.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;  // row-major, size = width * height

    DepthMap() = default;
    DepthMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f) {}

    float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    bool is_valid(int x, int y) const { return at(x, y) > 0.0f; }

    std::size_t size() const { return values.size(); }

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (float v : values) n += (v > 0.0f) ? 1 : 0;
        return n;
    }

    /// Checks the raster invariant: every value is finite and >= 0.
    void validate() const;
};

/// Depth raster carrying only a fraction of valid measurements.
struct SparseDepthMap : DepthMap {
    double density = 0.0;  // targeted valid fraction in (0, 1]

    SparseDepthMap() = default;
    SparseDepthMap(int w, int h, double d) : DepthMap(w, h), density(d) {}
    explicit SparseDepthMap(const DepthMap& m, double d) : DepthMap(m), density(d) {}
};

bool operator==(const ImageRgb8& a, const ImageRgb8& b);
bool operator==(const DepthMap& a, const DepthMap& b);

}  // namespace adc
