#include "adc/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "adc/error.hpp"

namespace adc::viz {

namespace {

ImageRgb8 mat_to_image(const cv::Mat& bgr) {
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    ImageRgb8 img(rgb.cols, rgb.rows);
    for (int y = 0; y < rgb.rows; ++y)
        std::memcpy(img.px(0, y), rgb.ptr(y), static_cast<std::size_t>(rgb.cols) * 3);
    return img;
}

const cv::Scalar kSeriesColors[] = {
    {48, 48, 220}, {40, 160, 40}, {200, 90, 30}, {150, 40, 160}, {30, 170, 200}, {90, 90, 90},
};

}  // namespace

ImageRgb8 false_color(const std::vector<float>& values, int w, int h, float vmin, float vmax) {
    if (values.size() != static_cast<std::size_t>(w) * h)
        throw ValidationError("false_color: value count does not match dimensions");
    if (vmin >= vmax) {
        vmin = values.empty() ? 0.0f : *std::min_element(values.begin(), values.end());
        vmax = values.empty() ? 1.0f : *std::max_element(values.begin(), values.end());
        if (vmax <= vmin) vmax = vmin + 1.0f;
    }
    cv::Mat gray(h, w, CV_8UC1);
    const float scale = 255.0f / (vmax - vmin);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float v = values[static_cast<std::size_t>(y) * w + x];
            gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(
                std::clamp((v - vmin) * scale, 0.0f, 255.0f));
        }
    cv::Mat colored;
    cv::applyColorMap(gray, colored, cv::COLORMAP_JET);
    return mat_to_image(colored);
}

ImageRgb8 line_plot(const std::vector<Series>& series, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel, int w, int h) {
    cv::Mat canvas(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
    const int ml = 80, mr = 30, mt = 50, mb = 60;  // margins
    const cv::Rect plot(ml, mt, w - ml - mr, h - mt - mb);

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                first = false;
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const auto to_px = [&](double x, double y) {
        const int px = plot.x + static_cast<int>((x - xmin) / (xmax - xmin) * plot.width);
        const int py = plot.y + plot.height - static_cast<int>((y - ymin) / (ymax - ymin) * plot.height);
        return cv::Point(px, py);
    };

    cv::rectangle(canvas, plot, cv::Scalar(60, 60, 60), 1);
    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        const cv::Point xp = to_px(xv, ymin), yp = to_px(xmin, yv);
        cv::line(canvas, {xp.x, plot.y + plot.height}, {xp.x, plot.y + plot.height + 5}, {60, 60, 60});
        cv::line(canvas, {plot.x - 5, yp.y}, {plot.x, yp.y}, {60, 60, 60});
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", xv);
        cv::putText(canvas, buf, {xp.x - 15, plot.y + plot.height + 22}, font, 0.42, {60, 60, 60}, 1,
                    cv::LINE_AA);
        std::snprintf(buf, sizeof(buf), "%.3g", yv);
        cv::putText(canvas, buf, {8, yp.y + 4}, font, 0.42, {60, 60, 60}, 1, cv::LINE_AA);
    }
    cv::putText(canvas, title, {ml, 30}, font, 0.6, {20, 20, 20}, 1, cv::LINE_AA);
    cv::putText(canvas, xlabel, {plot.x + plot.width / 2 - 40, h - 18}, font, 0.5, {20, 20, 20}, 1,
                cv::LINE_AA);
    cv::putText(canvas, ylabel, {8, mt - 12}, font, 0.5, {20, 20, 20}, 1, cv::LINE_AA);

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const cv::Scalar color = kSeriesColors[si % std::size(kSeriesColors)];
        for (std::size_t i = 0; i + 1 < s.x.size(); ++i)
            cv::line(canvas, to_px(s.x[i], s.y[i]), to_px(s.x[i + 1], s.y[i + 1]), color, 2,
                     cv::LINE_AA);
        for (std::size_t i = 0; i < s.x.size(); ++i)
            cv::circle(canvas, to_px(s.x[i], s.y[i]), 3, color, cv::FILLED, cv::LINE_AA);
        const int ly = mt + 18 * static_cast<int>(si);
        cv::line(canvas, {plot.x + plot.width - 150, ly}, {plot.x + plot.width - 120, ly}, color, 2);
        cv::putText(canvas, s.label, {plot.x + plot.width - 112, ly + 4}, font, 0.42, {20, 20, 20}, 1,
                    cv::LINE_AA);
    }
    return mat_to_image(canvas);
}

}  // namespace adc::viz
