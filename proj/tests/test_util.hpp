#pragma once

#include "koopman/autodiff.hpp"
#include "koopman/nets.hpp"
#include "koopman/tensor.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

using koopman::cplx;
using koopman::Scalar;
using koopman::Tensor;

inline Tensor random_tensor(int64_t rows, int64_t cols, koopman::nets::Rng& rng,
                            double lo = -1.0, double hi = 1.0) {
    Tensor t(rows, cols);
    for (int64_t i = 0; i < t.size(); ++i) {
        t[i] = rng.uniform(lo, hi);
    }
    return t;
}

inline Tensor random_complex_tensor(int64_t rows, int64_t cols, koopman::nets::Rng& rng,
                                    double lo = -1.0, double hi = 1.0) {
    Tensor t(rows, cols, Scalar::Complex128);
    for (int64_t i = 0; i < t.size(); ++i) {
        t.c(i) = cplx(rng.uniform(lo, hi), rng.uniform(lo, hi));
    }
    return t;
}

/// Builds a real scalar loss from leaves registered on the given tape.
using LossBuilder =
    std::function<koopman::ad::Var(koopman::ad::Tape&, std::vector<koopman::ad::Var>&)>;

inline double eval_loss(const std::vector<Tensor>& values, const LossBuilder& build) {
    koopman::ad::Tape tape;
    std::vector<koopman::ad::Var> leaves;
    for (const Tensor& v : values) {
        leaves.push_back(tape.leaf(v, false));
    }
    return build(tape, leaves).value()[0];
}

/// Central-difference gradient check of every leaf element (both real and
/// imaginary parts for complex leaves). Returns the worst relative error with
/// denominator max(|analytic|, |numeric|, floor).
inline double gradcheck_max_rel_err(const std::vector<Tensor>& values,
                                    const LossBuilder& build, double floor = 1e-6) {
    koopman::ad::Tape tape;
    std::vector<koopman::ad::Var> leaves;
    for (const Tensor& v : values) {
        leaves.push_back(tape.leaf(v, true));
    }
    koopman::ad::Var loss = build(tape, leaves);
    tape.backward(loss);
    std::vector<Tensor> grads;
    for (auto& leaf : leaves) {
        grads.push_back(leaf.grad());
    }

    double worst = 0.0;
    for (size_t L = 0; L < values.size(); ++L) {
        const int64_t parts = values[L].is_complex() ? 2 : 1;
        for (int64_t e = 0; e < values[L].size(); ++e) {
            for (int64_t part = 0; part < parts; ++part) {
                std::vector<Tensor> lo = values, hi = values;
                double x, analytic;
                if (values[L].is_real()) {
                    x = values[L][e];
                    analytic = grads[L][e];
                } else {
                    x = part == 0 ? values[L].c(e).real() : values[L].c(e).imag();
                    analytic = part == 0 ? grads[L].c(e).real() : grads[L].c(e).imag();
                }
                const double h = 1e-6 * (1.0 + std::abs(x));
                if (values[L].is_real()) {
                    hi[L][e] = x + h;
                    lo[L][e] = x - h;
                } else if (part == 0) {
                    hi[L].c(e) = cplx(x + h, values[L].c(e).imag());
                    lo[L].c(e) = cplx(x - h, values[L].c(e).imag());
                } else {
                    hi[L].c(e) = cplx(values[L].c(e).real(), x + h);
                    lo[L].c(e) = cplx(values[L].c(e).real(), x - h);
                }
                const double numeric =
                    (eval_loss(hi, build) - eval_loss(lo, build)) / (2.0 * h);
                const double denom =
                    std::max({std::abs(numeric), std::abs(analytic), floor});
                worst = std::max(worst, std::abs(numeric - analytic) / denom);
            }
        }
    }
    return worst;
}

inline double max_abs_diff_vs(const Tensor& a, const Tensor& b) {
    return koopman::max_abs_diff(a, b);
}

} // namespace testutil
