#pragma once

#include "koopman/data.hpp"
#include "koopman/metrics.hpp"
#include "koopman/nets.hpp"

#include <optional>
#include <vector>

namespace koopman::trajpred {

struct TrajPredConfig {
    int64_t encoded_size = 0; // required
    std::vector<int64_t> encoder_hidden_layers;
    std::optional<std::vector<int64_t>> decoder_hidden_layers; // default: mirror
    nets::Activation activation = nets::Activation::Tanh;
    bool use_bias = true;
    int64_t numepochs = 100;
    int64_t batch_size = 32;
    double alpha = 0.1; // decoder_loss_weight
    double beta = 0.0;  // weight_decay; gamma is forced equal to beta
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    bool scale_features = true;
    double anae_zero_epsilon = 0.0;

    metrics::LossWeights weights() const {
        return metrics::LossWeights::for_trajpred(alpha, beta);
    }
    void validate() const;
};

/// Plain rollout: [K y0, K^2 y0, ..., K^m y0] for a batch of initial encodings
/// (encoded_size x B). Positive integer step counts only.
std::vector<Tensor> rollout(const Tensor& K, const Tensor& y0, int64_t m);

/// Trajectory-prediction model: autoencoder + bias-free linear Koopman layer,
/// trained over shuffled trajectory batches; rolls out new initial states.
class TrajPred {
  public:
    TrajPred(data::TrajectoryDataset ds, TrajPredConfig cfg);

    metrics::RunStats train_net();
    metrics::SplitMetrics test_net() const;

    /// Per initial state (column of X0, original units): encode, roll out m
    /// steps, decode, inverse-scale. Returns one d x m tensor of predicted
    /// states per initial state; the given x0 is not part of the output.
    std::vector<Tensor> predict_new(const Tensor& X0, int64_t m) const;
    std::vector<Tensor> predict_new(const Tensor& X0) const; // m = training length

    /// No-gradient metrics of the current parameters on a trajectory set.
    metrics::SplitMetrics evaluate(const std::vector<Tensor>& trajs) const;

    bool trained() const { return trained_; }
    const Tensor& koopman_matrix() const { return K_; }
    const TrajPredConfig& config() const { return cfg_; }
    const nets::AutoencoderParams& params() const { return ae_; }
    const data::Scaler& scaler() const { return scaler_; }
    int64_t train_steps() const { return m_; }

    static TrajPred restore(TrajPredConfig cfg, nets::AutoencoderParams ae, Tensor K,
                            data::Scaler scaler, int64_t train_steps);

  private:
    TrajPred() = default;

    std::optional<data::TrajectoryDataset> ds_;
    TrajPredConfig cfg_;
    nets::AutoencoderParams ae_;
    Tensor K_;
    data::Scaler scaler_;
    int64_t m_ = 0; // steps per training trajectory
    bool trained_ = false;
};

} // namespace koopman::trajpred
