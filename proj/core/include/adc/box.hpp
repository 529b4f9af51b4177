#pragma once

#include <vector>

namespace adc {

/// Axis-aligned box in continuous pixel coordinates, half-open on both axes:
/// the covered region is [x_min, x_max) x [y_min, y_max). A pixel (ix, iy)
/// belongs to the box iff its center (ix + 0.5, iy + 0.5) lies inside.
/// Ground-truth boxes carry score 1.0.
struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;
    int class_id = 1;
    double score = 1.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }

    bool contains_pixel(int ix, int iy) const {
        double cx = ix + 0.5, cy = iy + 0.5;
        return cx >= x_min && cx < x_max && cy >= y_min && cy < y_max;
    }
};

bool operator==(const BoundingBox& a, const BoundingBox& b);

/// Throws ValidationError unless x_min < x_max, y_min < y_max, class_id >= 1
/// and score in [0, 1].
void validate_box(const BoundingBox& b);

/// Additionally requires the box to lie inside [0, w] x [0, h].
void validate_box_in_image(const BoundingBox& b, int w, int h);

using BoxList = std::vector<BoundingBox>;

}  // namespace adc
