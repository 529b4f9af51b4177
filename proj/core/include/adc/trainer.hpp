#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "adc/losses.hpp"
#include "adc/model.hpp"
#include "adc/sample.hpp"
#include "adc/state.hpp"

namespace adc::trainer {

struct TrainConfig {
    int epochs = 20;
    double base_lr = 1e-4;
    int lr_halving_period = 5;  // epochs between halvings
    int batch_size = 1;         // >1 accumulates gradients before stepping
    losses::LossWeights weights;
    losses::ConsistencyMode consistency_mode = losses::ConsistencyMode::Rmse;
    bool multitask = true;
    int checkpoint_every = 5;  // epochs; <=0 disables periodic checkpoints
    std::uint64_t seed = 0;
    double grad_clip_norm = 10.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

/// base_lr * 0.5^floor(epoch / period).
double lr_at(int epoch, const TrainConfig& cfg);

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double consistency = 0.0;  // per-epoch means
    double smoothness = 0.0;
    double detection = 0.0;
    double total = 0.0;
};

struct TrainResult {
    std::filesystem::path final_checkpoint;  // empty when out_dir was empty
    std::vector<EpochMetrics> metrics;
};

/// Full training run over a dataset directory: builds the model, initializes
/// from cfg.seed, optimizes, writes metrics.csv plus periodic and final
/// checkpoints under out_dir. Deterministic in cfg.seed.
TrainResult train(const std::filesystem::path& data_dir, const TrainConfig& cfg,
                  const ModelConfig& model_cfg, const std::filesystem::path& out_dir);

/// Core loop over already-loaded samples using an already-initialized model.
/// out_dir may be empty to skip checkpointing (used by tests).
TrainResult train_model(Model& model, const std::vector<Sample>& samples, const TrainConfig& cfg,
                        const std::filesystem::path& out_dir);

void write_metrics_csv(const std::vector<EpochMetrics>& metrics,
                       const std::filesystem::path& file);

/// Copies every parameter of `single` into its same-named slot of `multi`
/// (shapes checked); parameters that exist only in `multi` (the detection
/// head) are untouched. Throws ValidationError on a missing key or shape
/// mismatch.
NetworkState embed_single_into_multi(const NetworkState& single, const NetworkState& multi);

}  // namespace adc::trainer
