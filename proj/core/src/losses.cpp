#include "adc/losses.hpp"

#include <cmath>

#include "adc/error.hpp"

namespace adc::losses {

namespace {

void check_shapes(const DepthMap& pred, const DepthMap& gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw ValidationError("consistency_loss: pred and gt shapes differ");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double consistency_loss(const DepthMap& pred, const DepthMap& gt, ConsistencyMode mode) {
    check_shapes(pred, gt);
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < gt.values.size(); ++i) {
        if (gt.values[i] <= 0.0f) continue;
        const double r = static_cast<double>(pred.values[i]) - static_cast<double>(gt.values[i]);
        acc += mode == ConsistencyMode::Rmse ? r * r : std::abs(r);
        ++n;
    }
    if (n == 0) throw ValidationError("consistency_loss: gt has no valid pixels");
    const double mean = acc / static_cast<double>(n);
    return mode == ConsistencyMode::Rmse ? std::sqrt(mean) : mean;
}

DepthLossGrad consistency_loss_with_grad(const DepthMap& pred, const DepthMap& gt,
                                         ConsistencyMode mode) {
    check_shapes(pred, gt);
    DepthLossGrad out;
    out.grad.assign(pred.values.size(), 0.0);
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < gt.values.size(); ++i) {
        if (gt.values[i] <= 0.0f) continue;
        const double r = static_cast<double>(pred.values[i]) - static_cast<double>(gt.values[i]);
        acc += mode == ConsistencyMode::Rmse ? r * r : std::abs(r);
        ++n;
    }
    if (n == 0) throw ValidationError("consistency_loss: gt has no valid pixels");
    const double dn = static_cast<double>(n);
    if (mode == ConsistencyMode::Rmse) {
        out.value = std::sqrt(acc / dn);
        if (out.value > 0.0) {
            const double k = 1.0 / (dn * out.value);
            for (std::size_t i = 0; i < gt.values.size(); ++i) {
                if (gt.values[i] <= 0.0f) continue;
                out.grad[i] = k * (static_cast<double>(pred.values[i]) -
                                   static_cast<double>(gt.values[i]));
            }
        }
    } else {
        out.value = acc / dn;
        for (std::size_t i = 0; i < gt.values.size(); ++i) {
            if (gt.values[i] <= 0.0f) continue;
            out.grad[i] = sign(static_cast<double>(pred.values[i]) -
                               static_cast<double>(gt.values[i])) / dn;
        }
    }
    return out;
}

double smoothness_loss(const DepthMap& pred) {
    return smoothness_loss_with_grad(pred).value;
}

DepthLossGrad smoothness_loss_with_grad(const DepthMap& pred) {
    const int w = pred.width, h = pred.height;
    if (w < 3 || h < 3)
        throw ValidationError("smoothness_loss: map must be at least 3x3");
    DepthLossGrad out;
    out.grad.assign(pred.values.size(), 0.0);
    const double n = static_cast<double>(w - 2) * static_cast<double>(h - 2);
    const auto v = [&](int x, int y) { return static_cast<double>(pred.at(x, y)); };
    double acc = 0.0;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const double dxx = v(x - 1, y) - 2.0 * v(x, y) + v(x + 1, y);
            const double dyy = v(x, y - 1) - 2.0 * v(x, y) + v(x, y + 1);
            acc += std::abs(dxx) + std::abs(dyy);
            const double sx = sign(dxx) / n;
            const double sy = sign(dyy) / n;
            auto g = [&](int gx, int gy) -> double& {
                return out.grad[static_cast<std::size_t>(gy) * w + gx];
            };
            g(x - 1, y) += sx;
            g(x, y) += -2.0 * sx;
            g(x + 1, y) += sx;
            g(x, y - 1) += sy;
            g(x, y) += -2.0 * sy;
            g(x, y + 1) += sy;
        }
    }
    out.value = acc / n;
    return out;
}

double detection_loss(const DetectionLossTerms& terms, double lambda) {
    return terms.proposal + lambda * terms.final_detection;
}

double total_loss(const LossParts& parts, const LossWeights& w, bool multitask) {
    double total = w.w_consistency * parts.consistency + w.w_smoothness * parts.smoothness;
    if (multitask) total += w.w_detection * parts.detection;
    return total;
}

}  // namespace adc::losses
