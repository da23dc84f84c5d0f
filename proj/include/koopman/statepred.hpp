#pragma once

#include "koopman/data.hpp"
#include "koopman/metrics.hpp"
#include "koopman/nets.hpp"

#include <optional>
#include <vector>

namespace koopman::statepred {

enum class EigMode { Projected, Exact };

EigMode eig_mode_from_string(const std::string& name);
std::string to_string(EigMode mode);

struct StatePredConfig {
    int64_t rank = 0;         // required
    int64_t encoded_size = 0; // required
    std::vector<int64_t> encoder_hidden_layers;
    std::optional<std::vector<int64_t>> decoder_hidden_layers; // default: mirror
    nets::Activation activation = nets::Activation::Tanh;
    bool use_bias = true;
    int64_t numepochs = 100;
    metrics::LossWeights weights;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    EigMode eigenvector_mode = EigMode::Projected;
    bool detach_eig_gradient = false;
    bool scale_features = true;
    double anae_zero_epsilon = 0.0;

    void validate() const;
};

/// Eigen-factored Koopman operator of the encoded space. Internal index
/// spacing is 1 after normalization, so Omega = log(Lambda), principal branch.
struct KoopmanEigen {
    Tensor W;      // complex, encoded_size x r
    Tensor Lambda; // complex, r x 1, |Lambda_k| > 0
    Tensor Omega;  // complex, r x 1
    Tensor b;      // complex, r x 1: W^+ y_0
    int64_t rank = 0;
};

/// DMD fit of encoded states ordered by internal index: Y_prev = Y[:, :-1],
/// Y_next = Y[:, 1:], reduced operator from the truncated SVD of Y_prev,
/// eigendecomposition, mode lift (projected or exact), b = W^+ y_0.
KoopmanEigen koopman_fit(const Tensor& Y, int64_t rank,
                         EigMode mode = EigMode::Projected);

/// Full encoded-space operator K = Y_next V_r S_r^{-1} U_r^T from explicit
/// snapshot pairs (columns of Y_prev map to the same columns of Y_next).
Tensor dmd_operator(const Tensor& Y_prev, const Tensor& Y_next, int64_t rank);

/// y(i) = W diag(e^{Omega i}) b, real part. Emits an ImaginaryResidual warning
/// when max|Im| > 1e-4 max|Re|; the residual is reported via `max_imag`.
Tensor evolve(const KoopmanEigen& ke, double i, double* max_imag = nullptr);

/// One column per requested index.
Tensor evolve_many(const KoopmanEigen& ke, const std::vector<double>& indexes,
                   double* max_imag = nullptr);

/// State-prediction model: autoencoder + SVD-fitted Koopman operator, trained
/// end to end; predicts states at arbitrary real indexes after training.
class StatePred {
  public:
    StatePred(data::SnapshotDataset ds, StatePredConfig cfg);

    /// Per-epoch: encode, fit, evolve to the internal training indexes >= 1,
    /// decode, losses, backward, Adam step; validation metrics (if a val split
    /// exists) use the epoch's operator with no gradients. A final no-grad fit
    /// freezes the operator for prediction.
    metrics::RunStats train_net();

    metrics::SplitMetrics test_net() const;

    /// One predicted state row per requested original-unit index; indexes may
    /// be fractional or out of range (interpolation / extrapolation).
    Tensor predict_new(const std::vector<double>& t_new) const;

    bool trained() const { return trained_; }
    const KoopmanEigen& koopman() const;
    const StatePredConfig& config() const { return cfg_; }
    const nets::AutoencoderParams& params() const { return ae_; }
    const data::Scaler& scaler() const { return scaler_; }
    const data::IndexMap& index_map() const { return index_map_; }

    /// Rebuild a trained model from checkpoint state (prediction only).
    static StatePred restore(StatePredConfig cfg, nets::AutoencoderParams ae,
                             KoopmanEigen ke, data::Scaler scaler, data::IndexMap map);

  private:
    StatePred() = default;
    metrics::SplitMetrics evaluate_split(const data::SnapshotSplit& split,
                                         const KoopmanEigen& ke, double ae_decay,
                                         double k_decay) const;

    std::optional<data::SnapshotDataset> ds_;
    StatePredConfig cfg_;
    nets::AutoencoderParams ae_;
    data::Scaler scaler_;
    data::IndexMap index_map_;
    std::optional<KoopmanEigen> ke_;
    bool trained_ = false;
    double final_ae_decay_ = 0.0;
    double final_k_decay_ = 0.0;

    Tensor Xs_; // scaled training states, d x n, sorted by internal index
};

} // namespace koopman::statepred
