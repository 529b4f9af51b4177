#include "adc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "adc/dataio.hpp"
#include "adc/error.hpp"
#include "adc/rng.hpp"

namespace adc::trainer {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("TrainConfig: epochs must be >= 1");
    if (!(base_lr > 0.0)) throw ValidationError("TrainConfig: learning rate must be positive");
    if (lr_halving_period < 1) throw ValidationError("TrainConfig: halving period must be >= 1");
    if (batch_size < 1) throw ValidationError("TrainConfig: batch size must be >= 1");
    if (weights.w_consistency < 0 || weights.w_smoothness < 0 || weights.w_detection < 0 ||
        weights.lambda < 0)
        throw ValidationError("TrainConfig: loss weights must be >= 0");
    if (checkpoint_every < 0) throw ValidationError("TrainConfig: checkpoint cadence must be >= 0");
}

double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw ValidationError("lr_at: epoch must be >= 0");
    // Exact halving: scale the exponent instead of multiplying by 0.5^k.
    return std::ldexp(cfg.base_lr, -(epoch / cfg.lr_halving_period));
}

namespace {

class AdamOptimizer {
public:
    AdamOptimizer(nn::ParamRegistry& params, const TrainConfig& cfg)
        : params_(params), cfg_(cfg) {}

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
        for (auto& np : params_) {
            nn::Param& p = *np.param;
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double g = p.grad[i];
                const double m = cfg_.adam_beta1 * p.m[i] + (1.0 - cfg_.adam_beta1) * g;
                const double v = cfg_.adam_beta2 * p.v[i] + (1.0 - cfg_.adam_beta2) * g * g;
                p.m[i] = static_cast<float>(m);
                p.v[i] = static_cast<float>(v);
                const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.adam_eps);
                p.value[i] = static_cast<float>(p.value[i] - update);
            }
        }
    }

private:
    nn::ParamRegistry& params_;
    const TrainConfig& cfg_;
    int t_ = 0;
};

}  // namespace

TrainResult train_model(Model& model, const std::vector<Sample>& samples, const TrainConfig& cfg,
                        const fs::path& out_dir) {
    cfg.validate();
    if (samples.empty()) throw ValidationError("train: empty dataset");
    if (cfg.multitask && !model.config().multitask)
        throw ValidationError("train: multitask training requires a multitask model config");

    Pcg32 rng_shuffle(cfg.seed, 0x5851f42d4c957f2dull);
    Pcg32 rng_model(cfg.seed, 0x8b2fb47c21f7dca5ull);

    AdamOptimizer opt(model.params(), cfg);
    TrainResult result;
    const std::size_t n = samples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        // Seeded in-place shuffle; independent of the model rng stream.
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t j = i + rng_shuffle.bounded(static_cast<std::uint32_t>(n - i));
            std::swap(order[i], order[j]);
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.lr = lr;

        std::size_t done = 0;
        while (done < n) {
            const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n - done);
            model.zero_grads();
            for (std::size_t b = 0; b < batch; ++b) {
                const Sample& s = samples[order[done + b]];
                nn::FwdCtx ctx;
                ctx.grad = true;
                ctx.dropout = true;
                ctx.rng = &rng_model;

                Model::EncoderFeatures f = model.forward_encoder(s.rgb, s.sparse_depth, ctx);
                DepthMap pred = model.forward_depth(f, ctx);

                auto cons = losses::consistency_loss_with_grad(pred, s.dense_depth,
                                                               cfg.consistency_mode);
                auto smooth = losses::smoothness_loss_with_grad(pred);

                losses::DetectionLossTerms terms;
                double det_part = 0.0;
                const bool run_det = cfg.multitask && cfg.weights.w_detection > 0.0;
                if (run_det) {
                    auto det = model.forward_detection(f, true, &s.boxes, ctx);
                    terms = det.terms;
                    det_part = losses::detection_loss(terms, cfg.weights.lambda);
                }

                losses::LossParts parts{cons.value, smooth.value, det_part};
                const double total = losses::total_loss(parts, cfg.weights, run_det);
                if (!std::isfinite(total))
                    throw std::runtime_error(
                        "train: non-finite loss at epoch " + std::to_string(epoch) + " (consistency=" +
                        std::to_string(cons.value) + ", smoothness=" + std::to_string(smooth.value) +
                        ", detection=" + std::to_string(det_part) + ")");

                const double inv_b = 1.0 / static_cast<double>(batch);
                std::vector<double> d_depth(cons.grad.size());
                for (std::size_t i = 0; i < d_depth.size(); ++i)
                    d_depth[i] = inv_b * (cfg.weights.w_consistency * cons.grad[i] +
                                          cfg.weights.w_smoothness * smooth.grad[i]);
                model.backward(d_depth, run_det ? inv_b * cfg.weights.w_detection : 0.0,
                               run_det ? inv_b * cfg.weights.w_detection * cfg.weights.lambda : 0.0);

                em.consistency += cons.value;
                em.smoothness += smooth.value;
                em.detection += det_part;
                em.total += total;
            }
            nn::clip_grad_norm(model.params(), cfg.grad_clip_norm);
            opt.step(lr);
            done += batch;
        }

        em.consistency /= static_cast<double>(n);
        em.smoothness /= static_cast<double>(n);
        em.detection /= static_cast<double>(n);
        em.total /= static_cast<double>(n);
        result.metrics.push_back(em);

        if (!out_dir.empty()) {
            write_metrics_csv(result.metrics, out_dir / "metrics.csv");
            if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
                epoch + 1 < cfg.epochs) {
                char name[32];
                std::snprintf(name, sizeof(name), "epoch_%03d", epoch + 1);
                dataio::save_checkpoint(model.export_state(), model.config(), epoch + 1,
                                        out_dir / name);
            }
        }
    }

    if (!out_dir.empty()) {
        result.final_checkpoint = dataio::save_checkpoint(model.export_state(), model.config(),
                                                          cfg.epochs, out_dir / "final");
        write_metrics_csv(result.metrics, out_dir / "metrics.csv");
    }
    return result;
}

TrainResult train(const fs::path& data_dir, const TrainConfig& cfg, const ModelConfig& model_cfg,
                  const fs::path& out_dir) {
    cfg.validate();
    const auto dirs = dataio::list_sample_dirs(data_dir);
    if (dirs.empty()) throw ValidationError("train: no samples under " + data_dir.string());
    std::vector<Sample> samples;
    samples.reserve(dirs.size());
    for (const auto& d : dirs) samples.push_back(dataio::read_sample(d));

    ModelConfig mc = model_cfg;
    mc.multitask = cfg.multitask;
    Model model(mc);
    model.init_params(cfg.seed);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("train: cannot create output directory " + out_dir.string());
    return train_model(model, samples, cfg, out_dir);
}

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const fs::path& file) {
    std::ofstream os(file);
    if (!os) throw IoError("cannot open metrics file " + file.string());
    os << "epoch,lr,l_consistency,l_smoothness,l_detection,total\n";
    os.precision(10);
    for (const auto& m : metrics)
        os << m.epoch << ',' << m.lr << ',' << m.consistency << ',' << m.smoothness << ','
           << m.detection << ',' << m.total << '\n';
}

NetworkState embed_single_into_multi(const NetworkState& single, const NetworkState& multi) {
    NetworkState out = multi;
    for (const auto& p : single.params) {
        ParamBlob* dst = out.find(p.name);
        if (dst == nullptr)
            throw ValidationError("embed_single_into_multi: key '" + p.name +
                                  "' missing from multi-task state");
        if (dst->shape != p.shape)
            throw ValidationError("embed_single_into_multi: shape mismatch for '" + p.name + "'");
        dst->values = p.values;
    }
    return out;
}

}  // namespace adc::trainer
