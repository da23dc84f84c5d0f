#include "koopman/metrics.hpp"

#include "koopman/errors.hpp"

#include <cmath>

namespace koopman::metrics {

void LossWeights::validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
        throw InvalidParams("LossWeights: alpha, beta, gamma must be >= 0");
    }
}

double mse(const Tensor& p, const Tensor& q) {
    if (!p.is_real() || !q.is_real()) {
        throw ShapeMismatch("mse: complex input");
    }
    if (!p.same_shape(q)) {
        throw ShapeMismatch("mse: " + p.shape_str() + " vs " + q.shape_str());
    }
    double acc = 0.0;
    for (int64_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - q[i];
        acc += d * d;
    }
    return acc / static_cast<double>(p.size());
}

double anae(const Tensor& p, const Tensor& q, double zero_epsilon) {
    if (!p.is_real() || !q.is_real()) {
        throw ShapeMismatch("anae: complex input");
    }
    if (p.size() != q.size()) {
        throw ShapeMismatch("anae: element counts differ, " + p.shape_str() + " vs " +
                            q.shape_str());
    }
    // Both tensors are flattened; elements whose reference is (numerically) zero
    // are excluded from the average.
    double acc = 0.0;
    int64_t count = 0;
    for (int64_t i = 0; i < p.size(); ++i) {
        if (std::abs(p[i]) <= zero_epsilon) {
            continue;
        }
        acc += std::abs(p[i] - q[i]) / std::abs(p[i]);
        ++count;
    }
    if (count == 0) {
        throw AllReferenceZero("anae: every reference element is zero (or below epsilon)");
    }
    return 100.0 * acc / static_cast<double>(count);
}

void PooledError::add(const Tensor& p, const Tensor& q, double zero_epsilon) {
    if (!p.is_real() || !q.is_real() || p.size() != q.size()) {
        throw ShapeMismatch("PooledError::add: incompatible tensors");
    }
    for (int64_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - q[i];
        se_sum += d * d;
        if (std::abs(p[i]) > zero_epsilon) {
            anae_sum += std::abs(d) / std::abs(p[i]);
            ++anae_count;
        }
    }
    se_count += p.size();
}

double PooledError::anae_percent() const {
    if (anae_count == 0) {
        throw AllReferenceZero("anae: every reference element is zero (or below epsilon)");
    }
    return 100.0 * anae_sum / static_cast<double>(anae_count);
}

double PooledError::mse() const {
    return se_count == 0 ? 0.0 : se_sum / static_cast<double>(se_count);
}

ad::Var k_regularizer(ModelKind kind, ad::Var k) {
    if (kind == ModelKind::StatePred) {
        return ad::l1_mean(k);
    }
    return ad::sum_squares(k);
}

ad::Var total_loss(ad::Var recon, ad::Var lin, ad::Var pred, ad::Var ae_decay,
                   ad::Var k_decay, const LossWeights& w) {
    ad::Var loss = ad::add(lin, ad::scale(ad::add(recon, pred), w.alpha));
    loss = ad::add(loss, ad::scale(ae_decay, w.beta));
    loss = ad::add(loss, ad::scale(k_decay, w.gamma));
    return loss;
}

double total_loss_value(double recon, double lin, double pred, double ae_decay,
                        double k_decay, const LossWeights& w) {
    return lin + w.alpha * (recon + pred) + w.beta * ae_decay + w.gamma * k_decay;
}

} // namespace koopman::metrics
