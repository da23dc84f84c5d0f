#pragma once

#include "koopman/autodiff.hpp"
#include "koopman/tensor.hpp"

#include <optional>
#include <vector>

namespace koopman::metrics {

/// L = L_lin + alpha (L_recon + L_pred) + beta L_Autoencoder + gamma L_K.
/// For TrajPred gamma is forced equal to beta.
struct LossWeights {
    double alpha = 0.1; // decoder_loss_weight
    double beta = 0.0;  // weight_decay
    double gamma = 0.0; // Kreg

    static LossWeights for_trajpred(double alpha, double beta) {
        LossWeights w;
        w.alpha = alpha;
        w.beta = beta;
        w.gamma = beta;
        return w;
    }
    void validate() const;
};

struct SplitMetrics {
    double recon_loss = 0.0;
    double lin_loss = 0.0;
    double pred_loss = 0.0;
    double total_loss = 0.0;
    double recon_anae = 0.0; // percent
    double lin_anae = 0.0;   // percent
    double pred_anae = 0.0;  // percent
};

struct EpochMetrics {
    SplitMetrics train;
    std::optional<SplitMetrics> val;
};

struct RunStats {
    std::vector<EpochMetrics> epochs;
    std::optional<SplitMetrics> test;
};

/// Mean squared elementwise difference over all elements.
double mse(const Tensor& p, const Tensor& q);

/// Average Normalized Absolute Error in percent: mean over elements with
/// |p_i| > zero_epsilon of |p_i - q_i| / |p_i| * 100. The default epsilon of 0
/// reproduces the exact p_i != 0 condition. Throws AllReferenceZero when no
/// element qualifies.
double anae(const Tensor& p, const Tensor& q, double zero_epsilon = 0.0);

/// Pooled ANAE / MSE over several tensor pairs (per-epoch metrics spanning
/// batches use this so the result matches one flattened computation).
struct PooledError {
    double anae_sum = 0.0;
    int64_t anae_count = 0;
    double se_sum = 0.0;
    int64_t se_count = 0;

    void add(const Tensor& p, const Tensor& q, double zero_epsilon = 0.0);
    double anae_percent() const; // throws AllReferenceZero when nothing qualified
    double mse() const;
};

enum class ModelKind { StatePred, TrajPred };

/// Koopman-matrix penalty: mean |K_ij| for StatePred, sum of squared linear
/// layer weights for TrajPred.
ad::Var k_regularizer(ModelKind kind, ad::Var k);

ad::Var total_loss(ad::Var recon, ad::Var lin, ad::Var pred, ad::Var ae_decay,
                   ad::Var k_decay, const LossWeights& w);

double total_loss_value(double recon, double lin, double pred, double ae_decay,
                        double k_decay, const LossWeights& w);

} // namespace koopman::metrics
