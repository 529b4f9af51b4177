#pragma once

#include <vector>

#include "adc/image.hpp"

namespace adc::losses {

/// Relative weights of the training objective. `lambda` weights the final
/// detection term against the proposal term inside the detection loss.
struct LossWeights {
    double w_consistency = 1.0;
    double w_smoothness = 0.1;
    double w_detection = 1.0;
    double lambda = 1.0;
};

/// Rmse: sqrt of the mean squared residual over gt-valid pixels (the prose
/// reading of the consistency objective). LiteralEq1: mean absolute residual
/// (the printed per-pixel 2-norm of a scalar), kept selectable for study.
enum class ConsistencyMode { Rmse, LiteralEq1 };

/// Depth consistency over gt-valid pixels. Throws ValidationError on shape
/// mismatch or when gt has no valid pixels.
double consistency_loss(const DepthMap& pred, const DepthMap& gt,
                        ConsistencyMode mode = ConsistencyMode::Rmse);

/// Mean over interior pixels of the L1 norms of the discrete second
/// differences in x and y. Border pixels are excluded; requires H, W >= 3.
double smoothness_loss(const DepthMap& pred);

/// Loss value plus its analytic gradient w.r.t. every pred pixel
/// (row-major, zero outside the pixels the loss touches).
struct DepthLossGrad {
    double value = 0.0;
    std::vector<double> grad;
};

DepthLossGrad consistency_loss_with_grad(const DepthMap& pred, const DepthMap& gt,
                                         ConsistencyMode mode = ConsistencyMode::Rmse);
DepthLossGrad smoothness_loss_with_grad(const DepthMap& pred);

/// Proposal / final-detection terms produced by the detection pathway in
/// train mode. Each term already sums its classification and regression
/// parts.
struct DetectionLossTerms {
    double proposal = 0.0;
    double final_detection = 0.0;
};

/// proposal + lambda * final_detection.
double detection_loss(const DetectionLossTerms& terms, double lambda);

struct LossParts {
    double consistency = 0.0;
    double smoothness = 0.0;
    double detection = 0.0;  // already includes lambda
};

/// w_c * consistency + w_s * smoothness + (multitask ? w_d * detection : 0).
double total_loss(const LossParts& parts, const LossWeights& w, bool multitask);

}  // namespace adc::losses
