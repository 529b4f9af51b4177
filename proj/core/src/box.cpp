#include "adc/box.hpp"

#include <cmath>
#include <string>

#include "adc/error.hpp"

namespace adc {

bool operator==(const BoundingBox& a, const BoundingBox& b) {
    return a.x_min == b.x_min && a.y_min == b.y_min && a.x_max == b.x_max &&
           a.y_max == b.y_max && a.class_id == b.class_id && a.score == b.score;
}

void validate_box(const BoundingBox& b) {
    if (!(std::isfinite(b.x_min) && std::isfinite(b.y_min) && std::isfinite(b.x_max) &&
          std::isfinite(b.y_max)))
        throw ValidationError("BoundingBox: non-finite coordinate");
    if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max))
        throw ValidationError("BoundingBox: requires x_min < x_max and y_min < y_max");
    if (b.class_id < 1) throw ValidationError("BoundingBox: class_id must be >= 1");
    if (!(b.score >= 0.0 && b.score <= 1.0))
        throw ValidationError("BoundingBox: score must be in [0, 1]");
}

void validate_box_in_image(const BoundingBox& b, int w, int h) {
    validate_box(b);
    if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > static_cast<double>(w) ||
        b.y_max > static_cast<double>(h))
        throw ValidationError("BoundingBox: box (" + std::to_string(b.x_min) + "," +
                              std::to_string(b.y_min) + "," + std::to_string(b.x_max) + "," +
                              std::to_string(b.y_max) + ") outside image " +
                              std::to_string(w) + "x" + std::to_string(h));
}

}  // namespace adc
