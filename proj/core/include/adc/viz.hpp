#pragma once

#include <string>
#include <vector>

#include "adc/image.hpp"

namespace adc::viz {

/// Maps scalar values to a jet-style false-color image. vmin/vmax pin the
/// range; pass vmin >= vmax to auto-scale from the data.
ImageRgb8 false_color(const std::vector<float>& values, int w, int h, float vmin = 0.0f,
                      float vmax = 0.0f);

struct Series {
    std::string label;
    std::vector<double> x, y;
};

/// Minimal static line plot (axes, ticks, legend).
ImageRgb8 line_plot(const std::vector<Series>& series, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel, int w = 880,
                    int h = 620);

}  // namespace adc::viz
